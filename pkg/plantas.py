#!/usr/bin/env python3
"""
Plantas de prueba en coordenadas originales (x' = F(x) + G(x) u, y = H(x)) y en forma normal
(y' = f(y, eta) + g(y, eta) u, eta' = q(y, eta)), comprobación del supuesto de grado relativo uno,
estimación de cotas del modelo y entradas de referencia basadas en modelo.

El controlador nunca usa nada de este módulo: solo la verificación y la referencia de coste u_r.
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.stats import norm, qmc

from embudo import FunnelBoundary, ReferenceSignal, usv_y_r, usv_y_r_dot
from errores import ErrorDominio, ErrorSupuestoEstructural

try:
    from config import FACTOR_INFLADO_F, FACTOR_DEFLACION_G, MUESTRAS_COTAS
except ImportError:
    FACTOR_INFLADO_F = 1.05
    FACTOR_DEFLACION_G = 0.95
    MUESTRAS_COTAS = 10_000

# Más allá de esta dimensión no se añaden los vértices de la caja al muestreo.
MAX_DIM_VERTICES = 12


@dataclass(frozen=True)
class NormalFormPlant:
    m: int
    n_eta: int
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[np.ndarray, np.ndarray], np.ndarray]
    q: Callable[[np.ndarray, np.ndarray], np.ndarray]
    label: str


@dataclass(frozen=True)
class FullPlant:
    n: int
    m: int
    F: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    H_jac: Callable[[np.ndarray], np.ndarray]
    label: str

    def derivada(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        return self.F(x) + self.G(x) @ u


@dataclass(frozen=True)
class ModelBounds:
    f_bar: float
    g_underbar: float
    q_bar: float
    radio_salida: float
    radio_interno: float
    y_r_dot_sup: float
    region: str = "ball"


@dataclass(frozen=True)
class Caja:
    """Caja de muestreo [inferior, superior] sobre el estado."""
    inferior: np.ndarray
    superior: np.ndarray

    def __post_init__(self):
        inf = np.asarray(self.inferior, dtype=float)
        sup = np.asarray(self.superior, dtype=float)
        if inf.shape != sup.shape or np.any(sup < inf):
            raise ValueError("Caja inválida: inferior y superior deben tener igual forma e inferior <= superior")
        object.__setattr__(self, "inferior", inf)
        object.__setattr__(self, "superior", sup)

    @property
    def dim(self) -> int:
        return int(self.inferior.size)


@dataclass(frozen=True)
class InformeGradoRelativo:
    min_autovalor: float
    pasa: bool
    x_peor: np.ndarray
    muestras: int


# --- Plantas ---

def _rotacion_rumbo(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _deriva_usv(x: np.ndarray) -> np.ndarray:
    p_x, p_y = float(x[0]), float(x[1])
    if p_x == 0.0 and p_y == 0.0:
        raise ErrorDominio("Ángulo de deriva indefinido en p_x = p_y = 0")
    theta = math.atan2(p_y, p_x)
    return np.array([-math.sin(theta), math.cos(theta), 0.0])


def usv_plant() -> FullPlant:
    """Vehículo de superficie: y = x = [p_x, p_y, phi], u = [v, w, r], deriva de módulo uno."""
    return FullPlant(
        n=3, m=3, F=_deriva_usv, G=lambda x: _rotacion_rumbo(x[2]),
        H=lambda x: np.array(x, dtype=float),
        H_jac=lambda x: np.eye(3),
        label="usv",
    )


def linear_demo_plant() -> NormalFormPlant:
    """f = -y + [eta/2, eta/2], g = I, q = -eta + (y1 + y2)/2."""
    return NormalFormPlant(
        m=2, n_eta=1,
        f=lambda y, eta: -np.asarray(y, dtype=float) + 0.5 * float(eta[0]) * np.ones(2),
        g=lambda y, eta: np.eye(2),
        q=lambda y, eta: np.array([-float(eta[0]) + 0.5 * (float(y[0]) + float(y[1]))]),
        label="demo_lineal",
    )


def integrator_plant(m: int = 2) -> NormalFormPlant:
    return NormalFormPlant(
        m=m, n_eta=0,
        f=lambda y, eta: np.zeros(m),
        g=lambda y, eta: np.eye(m),
        q=lambda y, eta: np.zeros(0),
        label="integrador",
    )


def full_from_normal_form(plant: NormalFormPlant) -> FullPlant:
    """Estado x = (y, eta), salida = primeras m coordenadas."""
    m, n_eta = plant.m, plant.n_eta
    n = m + n_eta
    jac = np.hstack([np.eye(m), np.zeros((m, n_eta))])

    def F(x: np.ndarray) -> np.ndarray:
        y, eta = x[:m], x[m:]
        return np.concatenate([plant.f(y, eta), plant.q(y, eta)])

    def G(x: np.ndarray) -> np.ndarray:
        return np.vstack([plant.g(x[:m], x[m:]), np.zeros((n_eta, m))])

    return FullPlant(n=n, m=m, F=F, G=G, H=lambda x: np.array(x[:m], dtype=float),
                     H_jac=lambda x: jac, label=plant.label)


def normal_form_from_identity_output(full: FullPlant) -> NormalFormPlant:
    """Para plantas con H = id (n = m) la forma normal no tiene dinámica interna."""
    if full.n != full.m:
        raise ValueError(f"La planta {full.label} no tiene salida identidad (n={full.n}, m={full.m})")
    return NormalFormPlant(
        m=full.m, n_eta=0,
        f=lambda y, eta: full.F(np.asarray(y, dtype=float)),
        g=lambda y, eta: full.G(np.asarray(y, dtype=float)),
        q=lambda y, eta: np.zeros(0),
        label=full.label,
    )


def linear_demo_q_bar(radio_salida: float, eta0: float = 0.0) -> float:
    """Cota BIBS de la dinámica interna del demo: |eta(t)| <= max{|eta0|, ||y||_inf}."""
    return max(abs(float(eta0)), float(radio_salida))


# --- Supuesto estructural ---

def _min_autovalor_simetrico(M: np.ndarray) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])


def _matriz_entrada(plant: Union[FullPlant, NormalFormPlant], x: np.ndarray) -> np.ndarray:
    if isinstance(plant, FullPlant):
        return plant.H_jac(x) @ plant.G(x)
    return plant.g(x[:plant.m], x[plant.m:])


def _muestras_caja(caja: Caja, cantidad: int, semilla: int) -> np.ndarray:
    """Halton aleatorizado en la caja más sus vértices (si la dimensión lo permite)."""
    d = caja.dim
    u = qmc.Halton(d=d, scramble=True, seed=semilla).random(cantidad)
    puntos = caja.inferior + u * (caja.superior - caja.inferior)
    if d <= MAX_DIM_VERTICES:
        esquinas = np.array([[caja.superior[i] if (j >> i) & 1 else caja.inferior[i] for i in range(d)]
                             for j in range(2 ** d)])
        puntos = np.vstack([esquinas, puntos])
    return puntos


def check_relative_degree_one(plant: Union[FullPlant, NormalFormPlant], sample_count: int,
                              caja: Caja, semilla: int = 0) -> InformeGradoRelativo:
    """min sobre muestras de lambda_min(sym(H_jac G)) (o de sym(g) en forma normal); pasa si > 0."""
    if sample_count < 1:
        raise ValueError(f"sample_count debe ser >= 1 (sample_count={sample_count})")
    n = plant.n if isinstance(plant, FullPlant) else plant.m + plant.n_eta
    if caja.dim != n:
        raise ValueError(f"La caja tiene dimensión {caja.dim}, la planta {plant.label} tiene estado de dimensión {n}")
    peor, x_peor = math.inf, None
    puntos = _muestras_caja(caja, sample_count, semilla)
    for x in puntos:
        lam = _min_autovalor_simetrico(_matriz_entrada(plant, x))
        if lam < peor:
            peor, x_peor = lam, x
    return InformeGradoRelativo(peor, bool(peor > 0), np.asarray(x_peor), int(len(puntos)))


# --- Cotas del modelo ---

def _puntos_bola(u: np.ndarray, radio: float) -> np.ndarray:
    """Columna 0 -> radio, resto -> dirección (vía cuantiles normales). Filas pares sobre la esfera."""
    dim = u.shape[1] - 1
    direcciones = norm.ppf(np.clip(u[:, 1:], 1e-12, 1 - 1e-12))
    normas = np.linalg.norm(direcciones, axis=1, keepdims=True)
    normas[normas == 0] = 1.0
    fraccion = u[:, 0] ** (1.0 / dim)
    fraccion[::2] = 1.0
    return radio * fraccion[:, None] * direcciones / normas


def estimate_bounds(plant: NormalFormPlant, boundary: FunnelBoundary, reference: ReferenceSignal,
                    q_bar: float, sample_count: int = MUESTRAS_COTAS, semilla: int = 0,
                    region: str = "ball", horizonte: Optional[Tuple[float, float]] = None) -> ModelBounds:
    """
    f_bar = 1.05 (max ||f(z, q)|| + y_r_dot_sup),  g_underbar = 0.95 min lambda_min(sym g(z, q)).
    region="ball": ||z|| <= psi_sup + y_r_sup; region="tube": z en int(C) sobre el horizonte.
    En ambos casos ||q|| <= q_bar.
    """
    if q_bar < 0:
        raise ValueError(f"q_bar debe ser >= 0 (q_bar={q_bar})")
    if sample_count < 1000:
        raise ValueError(f"Se necesitan al menos 1000 muestras (sample_count={sample_count})")
    if region not in ("ball", "tube"):
        raise ValueError(f"Región desconocida: {region}")
    if region == "tube" and horizonte is None:
        raise ValueError("La región 'tube' necesita el horizonte (t0, t1)")

    m, n_eta = plant.m, plant.n_eta
    radio_salida = boundary.psi_sup + reference.y_r_sup
    dims = (1 + m) + (1 + n_eta if n_eta > 0 else 0) + (1 if region == "tube" else 0)
    u = qmc.Halton(d=dims, scramble=True, seed=semilla).random(sample_count)

    if region == "ball":
        zs = _puntos_bola(u[:, :1 + m], radio_salida)
    else:
        t0, t1 = horizonte
        ts = t0 + (t1 - t0) * u[:, -1]
        ts[0], ts[-1] = t0, t1
        desvios = _puntos_bola(u[:, :1 + m], 1.0)
        zs = np.array([reference.y_r(t) + boundary.psi(t) * d for t, d in zip(ts, desvios)])
    if n_eta > 0:
        qs = _puntos_bola(u[:, 1 + m:2 + m + n_eta], q_bar)
    else:
        qs = np.zeros((sample_count, 0))

    f_max, g_min = 0.0, math.inf
    for z, q in zip(zs, qs):
        f_max = max(f_max, float(np.linalg.norm(plant.f(z, q))))
        g_min = min(g_min, _min_autovalor_simetrico(plant.g(z, q)))
    if not g_min > 0:
        raise ErrorSupuestoEstructural(
            f"g no es definida positiva en la región de muestreo de {plant.label} (lambda_min={g_min:.4g})"
        )
    return ModelBounds(
        f_bar=FACTOR_INFLADO_F * (f_max + reference.y_r_dot_sup),
        g_underbar=FACTOR_DEFLACION_G * g_min,
        q_bar=float(q_bar),
        radio_salida=float(radio_salida),
        radio_interno=float(q_bar),
        y_r_dot_sup=reference.y_r_dot_sup,
        region=region,
    )


# --- Entradas basadas en modelo (solo verificación y coste) ---

def prop2_witness_input(plant: NormalFormPlant, t: float, y, eta, c: float,
                        reference: ReferenceSignal) -> np.ndarray:
    """u = g^-1 (-max{2c, 1} e - f + y_r_dot), la entrada testigo de que b es una CBF."""
    y = np.asarray(y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    e = y - reference.y_r(t)
    lado_derecho = -max(2.0 * c, 1.0) * e - plant.f(y, eta) + reference.y_r_dot(t)
    try:
        return np.linalg.solve(plant.g(y, eta), lado_derecho)
    except np.linalg.LinAlgError as exc:
        raise ErrorSupuestoEstructural(f"g singular en y={y}, eta={eta}") from exc


def usv_input_reference(t: float) -> np.ndarray:
    """u_r(t) = G(y_r(t))^T y_r_dot(t): solo la cinemática conocida, sin la deriva."""
    return _rotacion_rumbo(usv_y_r(t)[2]).T @ usv_y_r_dot(t)


def usv_model_input_reference(t: float) -> np.ndarray:
    """u_r(t) = G(y_r(t))^T (y_r_dot(t) - F(y_r(t))): modelo completo evaluado sobre la referencia."""
    y_r = usv_y_r(t)
    return _rotacion_rumbo(y_r[2]).T @ (usv_y_r_dot(t) - _deriva_usv(y_r))
