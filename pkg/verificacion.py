#!/usr/bin/env python3
"""
Verificación numérica por muestreo (usa el modelo, solo en pruebas y en el verbo `verify`):
- pertenencia a K_CBF(t, x, alpha) con alpha lineal,
- inclusión U(t, y) ⊆ K_CBF con el alpha de la construcción tangente,
- entrada testigo de que b es una CBF,
- cota epsilon de invariancia y su comprobación sobre trayectorias.
"""
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from embudo import FunnelBoundary, ReferenceSignal, barrier_value
from leyes_control import GainInterval, candidate_set
from plantas import ModelBounds, NormalFormPlant, prop2_witness_input

try:
    from config import RAZON_MAX_MUESTREO, TOL_COROLARIO, TOL_TESTIGO
except ImportError:
    RAZON_MAX_MUESTREO = 1.0 - 1e-6
    TOL_COROLARIO = 1e-6
    TOL_TESTIGO = 1e-9


@dataclass(frozen=True)
class ClassKeLinear:
    """alpha(s) = slope * s. Si viene de la construcción tangente guarda a y M de l(s) = a/s - M."""
    slope: float
    a: Optional[float] = None
    M: Optional[float] = None

    def __post_init__(self):
        if not self.slope > 0:
            raise ValueError(f"La pendiente de alpha debe ser positiva (slope={self.slope})")

    def __call__(self, s: float) -> float:
        return self.slope * s

    @property
    def s0(self) -> float:
        return 2.0 * self.a / self.M

    def cota_inferior(self, s: float) -> float:
        return self.a / s - self.M

    def tangente(self, s: float) -> float:
        return -self.slope * s


@dataclass
class MuestraInclusion:
    t: float
    y: np.ndarray
    eta: np.ndarray
    k: float
    margin: float


@dataclass
class InclusionReport:
    samples: int
    violations: int
    worst_margin: float
    witness: Optional[MuestraInclusion] = None
    umbral: float = 0.0
    filas: List[MuestraInclusion] = field(default_factory=list)

    @property
    def pasa(self) -> bool:
        return self.violations == 0


def alpha_from_bounds(bounds: ModelBounds, boundary: FunnelBoundary, gains: GainInterval) -> ClassKeLinear:
    """Tangente de l(s) = a/s - M en s0 = 2a/M: alpha(s) = M^2/(4a) s."""
    if not bounds.g_underbar > 0:
        raise ValueError(f"g_underbar debe ser positivo (g_underbar={bounds.g_underbar})")
    a = gains.k_min * bounds.g_underbar * boundary.psi_inf ** 2
    M = (boundary.c * boundary.psi_sup ** 2 + boundary.psi_sup * bounds.f_bar
         + 2.0 * gains.k_min * bounds.g_underbar)
    return ClassKeLinear(slope=M * M / (4.0 * a), a=a, M=M)


def prop2_alpha(c: float) -> ClassKeLinear:
    return ClassKeLinear(slope=2.0 * max(2.0 * c, 1.0))


def kcbf_margin(t: float, y, eta, u, alpha: ClassKeLinear, plant: NormalFormPlant,
                boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    """d_t b + L_f b + L_g b u + alpha(b), con grad_y b = -e."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    e = y - reference.y_r(t)
    deriva = plant.f(y, eta) + plant.g(y, eta) @ np.asarray(u, dtype=float)
    return (boundary.psi(t) * boundary.psi_dot(t) + float(e @ reference.y_r_dot(t))
            - float(e @ deriva) + alpha(barrier_value(t, y, boundary, reference)))


def kcbf_membership(t: float, y, eta, u, alpha: ClassKeLinear, plant: NormalFormPlant,
                    boundary: FunnelBoundary, reference: ReferenceSignal) -> Tuple[bool, float]:
    margen = kcbf_margin(t, y, eta, u, alpha, plant, boundary, reference)
    return bool(margen >= 0.0), margen


def _direccion(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    n = float(np.linalg.norm(v))
    return v / n if n > 0 else np.eye(dim)[0]


def muestrear_interior(plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal,
                       q_bar: float, sample_count: int, semilla: int, horizonte: Tuple[float, float]):
    """t uniforme en el horizonte, ||e||/psi uniforme en [0, 1 - 1e-6), eta uniforme en la bola q_bar."""
    rng = np.random.default_rng(semilla)
    t0, t1 = horizonte
    for _ in range(sample_count):
        t = float(rng.uniform(t0, t1))
        razon = float(rng.uniform(0.0, RAZON_MAX_MUESTREO))
        y = reference.y_r(t) + razon * boundary.psi(t) * _direccion(rng, plant.m)
        if plant.n_eta > 0:
            radio = q_bar * float(rng.uniform()) ** (1.0 / plant.n_eta)
            eta = radio * _direccion(rng, plant.n_eta)
        else:
            eta = np.zeros(0)
        yield t, y, eta


def _acumular(informe: InclusionReport, muestra: MuestraInclusion, guardar_filas: bool):
    if muestra.margin < informe.umbral:
        informe.violations += 1
    if muestra.margin < informe.worst_margin:
        informe.worst_margin = muestra.margin
        informe.witness = muestra
    if guardar_filas:
        informe.filas.append(muestra)


def theorem1_inclusion_check(plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal,
                             gains: GainInterval, alpha: ClassKeLinear, q_bar: float, sample_count: int,
                             semilla: int, horizonte: Tuple[float, float],
                             guardar_filas: bool = False) -> InclusionReport:
    """
    Comprueba U(t, y) ⊆ K_CBF evaluando solo los extremos k_min y k_max: la condición es afín en u
    y U(t, y) es un segmento.
    """
    informe = InclusionReport(samples=0, violations=0, worst_margin=math.inf)
    for t, y, eta in muestrear_interior(plant, boundary, reference, q_bar, sample_count, semilla, horizonte):
        conjunto = candidate_set(t, y, boundary, reference, gains)
        for k in (gains.k_min, gains.k_max):
            margen = kcbf_margin(t, y, eta, conjunto.elemento(k), alpha, plant, boundary, reference)
            _acumular(informe, MuestraInclusion(t, y, eta, k, margen), guardar_filas)
        informe.samples += 1
    return informe


def endpoint_consistency_check(plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal,
                               gains: GainInterval, alpha: ClassKeLinear, q_bar: float, sample_count: int,
                               semilla: int, horizonte: Tuple[float, float], k_interiores: int = 10) -> int:
    """Cuenta muestras donde ambos extremos pertenecen a K_CBF pero algún k interior no."""
    discrepancias = 0
    ks = np.linspace(gains.k_min, gains.k_max, k_interiores + 2)[1:-1]
    for t, y, eta in muestrear_interior(plant, boundary, reference, q_bar, sample_count, semilla, horizonte):
        conjunto = candidate_set(t, y, boundary, reference, gains)
        extremos = [kcbf_membership(t, y, eta, u, alpha, plant, boundary, reference)[0]
                    for u in conjunto.extremos()]
        if not all(extremos):
            continue
        if not all(kcbf_membership(t, y, eta, conjunto.elemento(k), alpha, plant, boundary, reference)[0]
                   for k in ks):
            discrepancias += 1
    return discrepancias


def prop2_witness_check(plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal,
                        q_bar: float, sample_count: int, semilla: int, horizonte: Tuple[float, float],
                        guardar_filas: bool = False) -> InclusionReport:
    """Margen con la entrada testigo y alpha(s) = 2 max{2c, 1} s; debe ser >= c psi_inf^2."""
    c = boundary.c
    alpha = prop2_alpha(c)
    informe = InclusionReport(samples=0, violations=0, worst_margin=math.inf,
                              umbral=c * boundary.psi_inf ** 2 - TOL_TESTIGO)
    for t, y, eta in muestrear_interior(plant, boundary, reference, q_bar, sample_count, semilla, horizonte):
        u = prop2_witness_input(plant, t, y, eta, c, reference)
        margen = kcbf_margin(t, y, eta, u, alpha, plant, boundary, reference)
        _acumular(informe, MuestraInclusion(t, y, eta, math.nan, margen), guardar_filas)
        informe.samples += 1
    return informe


def epsilon_hat(R: float) -> float:
    """Menor solución de eps^2 / (1 - eps^2) >= R."""
    if R < 0:
        raise ValueError(f"R debe ser >= 0 (R={R})")
    return math.sqrt(R / (1.0 + R))


def epsilon_bound(bounds: ModelBounds, boundary: FunnelBoundary, reference: ReferenceSignal,
                  gains: GainInterval, e0_ratio: float, malla) -> float:
    """
    R = (||psi_dot/psi||_inf + sup(1/psi) (f_bar + y_r_dot_sup)) / (2 g_underbar k_min inf(1/psi)),
    eps = max{e0_ratio, sqrt(R/(1+R))}.
    f_bar ya incluye y_r_dot_sup y se vuelve a sumar (fórmula tal cual, conservadora).
    """
    if not 0.0 <= e0_ratio < 1.0:
        raise ValueError(f"e0_ratio debe estar en [0, 1) (e0_ratio={e0_ratio})")
    ts = np.asarray(malla, dtype=float)
    razon_max = max(abs(boundary.psi_dot(t)) / boundary.psi(t) for t in ts)
    numerador = razon_max + (bounds.f_bar + reference.y_r_dot_sup) / boundary.psi_inf
    denominador = 2.0 * bounds.g_underbar * gains.k_min / boundary.psi_sup
    eps = max(e0_ratio, epsilon_hat(numerador / denominador))
    if eps >= 1.0:
        raise ValueError(f"epsilon = {eps} no es < 1")
    return eps


def corollary_invariance_check(trayectoria, eps: float) -> Tuple[bool, float]:
    """max ||e||/psi <= eps + tol sobre la malla de la trayectoria."""
    razones = np.asarray(trayectoria.ratio, dtype=float)
    max_razon = float(razones.max()) if razones.size else 0.0
    return bool(max_razon <= eps + TOL_COROLARIO), max_razon


def input_norm_bound(gains: GainInterval, boundary: FunnelBoundary, eps: float) -> float:
    """||u(t)|| <= k_max psi_sup / ((1 - eps^2) psi_inf)."""
    return gains.k_max * boundary.psi_sup / ((1.0 - eps ** 2) * boundary.psi_inf)
