#!/usr/bin/env python3
"""
Función barrera del embudo, frontera psi, señal de referencia y geometría del conjunto seguro.
Todo lo que aquí se calcula depende solo de la salida y (nunca del modelo de la planta):

    b(t, y) = 1/2 (psi(t)^2 - ||y - y_r(t)||^2),    C = {(t, y) : ||y - y_r(t)|| <= psi(t)}
"""
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np

try:
    from config import TOL_FRONTERA, PASO_DIFERENCIAS, PASO_MALLA
except ImportError:
    TOL_FRONTERA = 1e-12
    PASO_DIFERENCIAS = 1e-5
    PASO_MALLA = 1e-2

# Referencia del USV: y_r = [-0.8 t + 8, 4 cos(w t), arctan(a sin(w t))]
OMEGA_USV = 3.0 * math.pi / 20.0
AMPLITUD_RUMBO_USV = 3.0 * math.pi / 2.0


def malla_uniforme(t0: float, t1: float, paso: float = PASO_MALLA) -> np.ndarray:
    """Malla [t0, t1] con paso fijo; el último punto es exactamente t1."""
    if paso <= 0 or t1 < t0:
        raise ValueError(f"Malla inválida: t0={t0}, t1={t1}, paso={paso}")
    n = int(round((t1 - t0) / paso))
    return t0 + paso * np.arange(n + 1)


def _comprobar_malla(malla: Sequence[float]) -> np.ndarray:
    ts = np.asarray(malla, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("La malla de tiempos está vacía")
    if ts.size > 1 and not np.all(np.diff(ts) > 0):
        raise ValueError("La malla de tiempos debe ser estrictamente creciente")
    return ts


def derivada_central(fn: Callable[[float], object], t: float, h: float = PASO_DIFERENCIAS):
    """(fn(t+h) - fn(t-h)) / 2h; sirve para escalares y vectores."""
    return (np.asarray(fn(t + h), dtype=float) - np.asarray(fn(t - h), dtype=float)) / (2.0 * h)


@dataclass(frozen=True)
class FunnelBoundary:
    """Frontera psi de la clase Psi: positiva, acotada, |psi_dot| <= c psi."""
    psi: Callable[[float], float]
    psi_dot: Callable[[float], float]
    c: float
    psi_inf: float
    psi_sup: float

    @classmethod
    def sobre_malla(cls, psi, psi_dot, c: float, malla) -> "FunnelBoundary":
        ts = _comprobar_malla(malla)
        valores = np.array([psi(t) for t in ts])
        return cls(psi=psi, psi_dot=psi_dot, c=float(c),
                   psi_inf=float(valores.min()), psi_sup=float(valores.max()))


@dataclass(frozen=True)
class ReferenceSignal:
    """Referencia y_r con derivada y normas sup sobre la malla de validación."""
    y_r: Callable[[float], np.ndarray]
    y_r_dot: Callable[[float], np.ndarray]
    y_r_sup: float
    y_r_dot_sup: float

    @property
    def m(self) -> int:
        return int(np.asarray(self.y_r(0.0)).size)

    @classmethod
    def sobre_malla(cls, y_r, y_r_dot, malla) -> "ReferenceSignal":
        ts = _comprobar_malla(malla)
        sup = max(float(np.linalg.norm(y_r(t))) for t in ts)
        sup_dot = max(float(np.linalg.norm(y_r_dot(t))) for t in ts)
        return cls(y_r=y_r, y_r_dot=y_r_dot, y_r_sup=sup, y_r_dot_sup=sup_dot)


@dataclass(frozen=True)
class BarrierPoint:
    t: float
    y: np.ndarray
    b: float
    grad_y: np.ndarray
    d_t: float
    error_norm_ratio: float


class SafeSetClass(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


@dataclass(frozen=True)
class ValidacionEmbudo:
    valido: bool
    peor_razon: float
    t_peor_razon: float
    psi_min: float
    t_psi_min: float


@dataclass(frozen=True)
class ValidacionReferencia:
    valido: bool
    max_norma: float
    max_norma_dot: float
    max_desvio_fd: float
    t_desvio_fd: float


# --- Constructores de fronteras y referencias ---

def funnel_exponential(amplitud: float, tasa: float, piso: float, c: float, malla) -> FunnelBoundary:
    """psi(t) = amplitud * exp(-tasa t) + piso, con derivada analítica."""
    if piso <= 0:
        raise ValueError(f"El piso del embudo debe ser positivo (piso={piso})")

    def psi(t: float) -> float:
        return amplitud * math.exp(-tasa * t) + piso

    def psi_dot(t: float) -> float:
        return -tasa * amplitud * math.exp(-tasa * t)

    return FunnelBoundary.sobre_malla(psi, psi_dot, c, malla)


def funnel_constant(valor: float, c: float, malla) -> FunnelBoundary:
    if valor <= 0:
        raise ValueError(f"psi constante debe ser positiva (valor={valor})")
    return FunnelBoundary.sobre_malla(lambda t: valor, lambda t: 0.0, c, malla)


def funnel_from_function(psi, c: float, malla, psi_dot=None) -> FunnelBoundary:
    """Si psi_dot no se da, se sintetiza con diferencias centrales."""
    if psi_dot is None:
        def psi_dot(t: float) -> float:
            return float(derivada_central(psi, t))
    return FunnelBoundary.sobre_malla(psi, psi_dot, c, malla)


def usv_y_r(t: float) -> np.ndarray:
    w, a = OMEGA_USV, AMPLITUD_RUMBO_USV
    return np.array([-0.8 * t + 8.0, 4.0 * math.cos(w * t), math.atan(a * math.sin(w * t))])


def usv_y_r_dot(t: float) -> np.ndarray:
    w, a = OMEGA_USV, AMPLITUD_RUMBO_USV
    s = math.sin(w * t)
    return np.array([-0.8, -4.0 * w * s, a * w * math.cos(w * t) / (1.0 + (a * s) ** 2)])


def usv_reference(malla) -> ReferenceSignal:
    """Trayectoria de referencia del vehículo de superficie (derivada analítica)."""
    return ReferenceSignal.sobre_malla(usv_y_r, usv_y_r_dot, malla)


def constant_reference(valor, malla) -> ReferenceSignal:
    v = np.asarray(valor, dtype=float)
    cero = np.zeros_like(v)
    return ReferenceSignal.sobre_malla(lambda t: v.copy(), lambda t: cero.copy(), malla)


def circular_reference(radio: float, omega: float, malla) -> ReferenceSignal:
    """y_r(t) = radio [sin(omega t), cos(omega t)]."""
    def y_r(t: float) -> np.ndarray:
        return radio * np.array([math.sin(omega * t), math.cos(omega * t)])

    def y_r_dot(t: float) -> np.ndarray:
        return radio * omega * np.array([math.cos(omega * t), -math.sin(omega * t)])

    return ReferenceSignal.sobre_malla(y_r, y_r_dot, malla)


def reference_from_function(y_r, malla, y_r_dot=None) -> ReferenceSignal:
    if y_r_dot is None:
        def y_r_dot(t: float) -> np.ndarray:
            return derivada_central(y_r, t)
    return ReferenceSignal.sobre_malla(y_r, y_r_dot, malla)


# --- Validación sobre malla ---

def validate_funnel(boundary: FunnelBoundary, malla) -> ValidacionEmbudo:
    """Certifica psi en Psi sobre la malla: min psi > 0 y max |psi_dot|/psi <= c."""
    ts = _comprobar_malla(malla)
    psis = np.array([boundary.psi(t) for t in ts], dtype=float)
    dots = np.array([boundary.psi_dot(t) for t in ts], dtype=float)
    i_min = int(np.argmin(psis))
    psi_min = float(psis[i_min])
    if psi_min <= 0:
        return ValidacionEmbudo(False, math.inf, float(ts[i_min]), psi_min, float(ts[i_min]))
    razones = np.abs(dots) / psis
    i_peor = int(np.argmax(razones))
    peor = float(razones[i_peor])
    valido = bool(peor <= boundary.c and np.all(np.isfinite(psis)))
    return ValidacionEmbudo(valido, peor, float(ts[i_peor]), psi_min, float(ts[i_min]))


def validate_reference(reference: ReferenceSignal, malla, tol: float = 1e-6) -> ValidacionReferencia:
    """Cotas sup respetadas y y_r_dot consistente con diferencias centrales de y_r."""
    ts = _comprobar_malla(malla)
    max_norma = max_norma_dot = max_desvio = 0.0
    t_desvio = float(ts[0])
    for t in ts:
        max_norma = max(max_norma, float(np.linalg.norm(reference.y_r(t))))
        dot = np.asarray(reference.y_r_dot(t), dtype=float)
        max_norma_dot = max(max_norma_dot, float(np.linalg.norm(dot)))
        desvio = float(np.linalg.norm(dot - derivada_central(reference.y_r, t)))
        if desvio > max_desvio:
            max_desvio, t_desvio = desvio, float(t)
    # Holgura relativa mínima: el sup se calculó sobre la misma malla.
    valido = (max_norma <= reference.y_r_sup * (1 + 1e-12) + 1e-12
              and max_norma_dot <= reference.y_r_dot_sup * (1 + 1e-12) + 1e-12
              and max_desvio <= tol)
    return ValidacionReferencia(bool(valido), max_norma, max_norma_dot, max_desvio, t_desvio)


def gronwall_envelope_check(boundary: FunnelBoundary, malla, holgura: float = 0.01):
    """psi(t) e^(-c D) <= psi(t+D) <= psi(t) e^(c D) entre vecinos de la malla. Devuelve (cumple, peor_exceso)."""
    ts = _comprobar_malla(malla)
    psis = np.array([boundary.psi(t) for t in ts], dtype=float)
    if ts.size < 2:
        return True, 0.0
    deltas = np.diff(ts)
    actual, siguiente = psis[:-1], psis[1:]
    inferior = actual * np.exp(-boundary.c * deltas) * (1.0 - holgura)
    superior = actual * np.exp(boundary.c * deltas) * (1.0 + holgura)
    exceso = np.maximum(inferior - siguiente, siguiente - superior)
    peor = float(exceso.max())
    return bool(peor <= 0.0), peor


# --- Barrera ---

def _error(t: float, y, reference: ReferenceSignal) -> np.ndarray:
    return np.asarray(y, dtype=float) - np.asarray(reference.y_r(t), dtype=float)


def barrier_value(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    e = _error(t, y, reference)
    return 0.5 * (boundary.psi(t) ** 2 - float(e @ e))


def barrier_gradient_output(t: float, y, reference: ReferenceSignal) -> np.ndarray:
    return -_error(t, y, reference)


def barrier_time_derivative(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> float:
    """d_t b = psi psi_dot + <y - y_r, y_r_dot>."""
    e = _error(t, y, reference)
    return boundary.psi(t) * boundary.psi_dot(t) + float(e @ np.asarray(reference.y_r_dot(t), dtype=float))


def barrier_point(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal) -> BarrierPoint:
    e = _error(t, y, reference)
    psi = boundary.psi(t)
    return BarrierPoint(
        t=float(t),
        y=np.asarray(y, dtype=float),
        b=0.5 * (psi ** 2 - float(e @ e)),
        grad_y=-e,
        d_t=barrier_time_derivative(t, y, boundary, reference),
        error_norm_ratio=float(np.linalg.norm(e)) / psi,
    )


def in_safe_set(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal,
                tol: Optional[float] = None) -> SafeSetClass:
    tol = TOL_FRONTERA if tol is None else tol
    if tol < 0:
        raise ValueError(f"La tolerancia debe ser >= 0 (tol={tol})")
    norma = float(np.linalg.norm(_error(t, y, reference)))
    psi = boundary.psi(t)
    if abs(norma - psi) <= tol:
        return SafeSetClass.BOUNDARY
    if norma < psi - tol:
        return SafeSetClass.INTERIOR
    return SafeSetClass.EXTERIOR
