#!/usr/bin/env python3
"""
Conjuntos de control candidatos sin modelo y filtro de seguridad.

    U(t, y)       = { k grad_y b / b              : k en [k_min, k_max] },  (t, y) en int(C)
    U_delta(t, y) = { k grad_y b / max(b, delta)  : k en [k_min, k_max] },  cualquier (t, y)

Cada conjunto es un segmento en R^m; el filtro mínimamente invasivo es la proyección de u_ref sobre él.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np

from embudo import FunnelBoundary, ReferenceSignal, barrier_gradient_output, barrier_value
from errores import ErrorFueraDeEmbudo

try:
    from config import TOL_CONTENCION
except ImportError:
    TOL_CONTENCION = 1e-9


@dataclass(frozen=True)
class GainInterval:
    k_min: float
    k_max: float

    def __post_init__(self):
        if not (0 < self.k_min <= self.k_max):
            raise ValueError(f"Intervalo de ganancias inválido: [{self.k_min}, {self.k_max}]")

    def contiene(self, k: float) -> bool:
        return self.k_min <= k <= self.k_max


@dataclass(frozen=True)
class SaturationParam:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta debe ser positivo (delta={self.delta})")


class SetOrigin(Enum):
    INTERIOR_SET = "interior-set"
    SATURATED_SET = "saturated-set"


class ActiveClamp(Enum):
    NONE = "none"
    LOWER = "lower"
    UPPER = "upper"
    DEGENERATE = "degenerate"


@dataclass(frozen=True)
class CandidateControlSet:
    """Segmento {k * direction / denominator : k en gains}."""
    direction: np.ndarray
    denominator: float
    gains: GainInterval
    origin: SetOrigin

    def __post_init__(self):
        if not self.denominator > 0:
            raise ValueError(f"El denominador debe ser positivo (denominador={self.denominator})")

    @property
    def d(self) -> np.ndarray:
        return self.direction / self.denominator

    def elemento(self, k: float) -> np.ndarray:
        return k * self.d

    def extremos(self):
        return self.elemento(self.gains.k_min), self.elemento(self.gains.k_max)


class FilterResult(NamedTuple):
    u: np.ndarray
    k_star: float
    active_clamp: ActiveClamp


def candidate_set(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal,
                  gains: GainInterval) -> CandidateControlSet:
    b = barrier_value(t, y, boundary, reference)
    if not b > 0:
        raise ErrorFueraDeEmbudo(f"candidate set undefined outside int(C) (t={t:.6g}, b={b:.3e})")
    return CandidateControlSet(barrier_gradient_output(t, y, reference), b, gains, SetOrigin.INTERIOR_SET)


def saturated_candidate_set(t: float, y, boundary: FunnelBoundary, reference: ReferenceSignal,
                            gains: GainInterval, delta: SaturationParam) -> CandidateControlSet:
    b = barrier_value(t, y, boundary, reference)
    return CandidateControlSet(barrier_gradient_output(t, y, reference), max(b, delta.delta),
                               gains, SetOrigin.SATURATED_SET)


def funnel_feedback(conjunto: CandidateControlSet, k: float) -> np.ndarray:
    if not conjunto.gains.contiene(k):
        raise ValueError(
            f"Ganancia k={k} fuera de [{conjunto.gains.k_min}, {conjunto.gains.k_max}]"
        )
    return conjunto.elemento(k)


def safety_filter(conjunto: CandidateControlSet, u_ref) -> FilterResult:
    """argmin ||u - u_ref||^2 sobre el segmento, en forma cerrada."""
    d = conjunto.d
    dd = float(d @ d)
    g = conjunto.gains
    if dd == 0.0:
        return FilterResult(np.zeros_like(d), g.k_min, ActiveClamp.DEGENERATE)
    k_libre = float(np.asarray(u_ref, dtype=float) @ d) / dd
    if k_libre < g.k_min:
        k_star, clamp = g.k_min, ActiveClamp.LOWER
    elif k_libre > g.k_max:
        k_star, clamp = g.k_max, ActiveClamp.UPPER
    else:
        k_star, clamp = k_libre, ActiveClamp.NONE
    return FilterResult(k_star * d, k_star, clamp)


def set_contains(conjunto: CandidateControlSet, u, tol: float = TOL_CONTENCION) -> bool:
    """Proyecta u sobre el segmento y compara el residuo con tol."""
    if tol < 0:
        raise ValueError(f"La tolerancia debe ser >= 0 (tol={tol})")
    proyeccion = safety_filter(conjunto, u).u
    return bool(np.linalg.norm(np.asarray(u, dtype=float) - proyeccion) <= tol)


# --- Controladores sin modelo: mu(t, y) ---

class FunnelController:
    """Controlador funnel clásico con ganancia fija k."""
    interior = True

    def __init__(self, boundary: FunnelBoundary, reference: ReferenceSignal, gains: GainInterval, k: float):
        if not gains.contiene(k):
            raise ValueError(f"Ganancia k={k} fuera de [{gains.k_min}, {gains.k_max}]")
        self.boundary = boundary
        self.reference = reference
        self.gains = gains
        self.k = k

    def candidate(self, t: float, y) -> CandidateControlSet:
        return candidate_set(t, y, self.boundary, self.reference, self.gains)

    def __call__(self, t: float, y) -> np.ndarray:
        return funnel_feedback(self.candidate(t, y), self.k)


class CbfFilterController:
    """Filtro QP sobre U(t, y) con coste ||u - u_ref(t)||^2."""
    interior = True

    def __init__(self, boundary: FunnelBoundary, reference: ReferenceSignal, gains: GainInterval,
                 u_ref: Callable[[float], np.ndarray]):
        self.boundary = boundary
        self.reference = reference
        self.gains = gains
        self.u_ref = u_ref

    def candidate(self, t: float, y) -> CandidateControlSet:
        return candidate_set(t, y, self.boundary, self.reference, self.gains)

    def __call__(self, t: float, y) -> np.ndarray:
        return safety_filter(self.candidate(t, y), self.u_ref(t)).u


class SaturatedFilterController(CbfFilterController):
    """Filtro QP sobre U_delta(t, y); admite arrancar fuera del conjunto seguro."""
    interior = False

    def __init__(self, boundary: FunnelBoundary, reference: ReferenceSignal, gains: GainInterval,
                 delta: SaturationParam, u_ref: Optional[Callable[[float], np.ndarray]] = None):
        if u_ref is None:
            m = reference.m
            u_ref = lambda t: np.zeros(m)
        super().__init__(boundary, reference, gains, u_ref)
        self.delta = delta

    def candidate(self, t: float, y) -> CandidateControlSet:
        return saturated_candidate_set(t, y, self.boundary, self.reference, self.gains, self.delta)
