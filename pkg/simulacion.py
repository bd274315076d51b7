#!/usr/bin/env python3
"""
Simulación en lazo cerrado con paso fijo (RK4, realimentación evaluada en cada etapa),
detección de violaciones del embudo, métricas de experimento y exportación CSV.
"""
import csv
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from embudo import FunnelBoundary, ReferenceSignal, SafeSetClass, barrier_value, in_safe_set, malla_uniforme
from errores import Divergencia, ErrorDominio, ErrorFueraDeEmbudo, ErrorMetricas, ErrorReduccion
from plantas import FullPlant
from reportes import escritura_atomica

try:
    from config import GUARDA_BARRERA, SUBDIVISIONES_MAX
except ImportError:
    GUARDA_BARRERA = 1e-9
    SUBDIVISIONES_MAX = 4


class EstadoTrayectoria(Enum):
    COMPLETED = "completed"
    VIOLATED = "violated"
    DIVERGED = "diverged"


@dataclass
class SimConfig:
    plant: FullPlant
    controller: Callable[[float, np.ndarray], np.ndarray]
    x0: np.ndarray
    boundary: FunnelBoundary
    reference: ReferenceSignal
    t0: float = 0.0
    horizon: float = 10.0
    step: float = 1e-3
    u_ref: Optional[Callable[[float], np.ndarray]] = None
    seed: int = 0
    guard: float = GUARDA_BARRERA
    subdivisiones_max: int = SUBDIVISIONES_MAX
    nombre: str = ""

    def __post_init__(self):
        if not self.step > 0 or not self.horizon > 0:
            raise ValueError(f"step y horizon deben ser positivos (step={self.step}, horizon={self.horizon})")
        if self.step > self.horizon:
            raise ValueError(f"step={self.step} mayor que horizon={self.horizon}")
        self.x0 = np.asarray(self.x0, dtype=float)
        if self.x0.size != self.plant.n:
            raise ValueError(f"x0 tiene dimensión {self.x0.size}, la planta {self.plant.label} espera {self.plant.n}")

    @property
    def malla(self) -> np.ndarray:
        return malla_uniforme(self.t0, self.t0 + self.horizon, self.step)


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    b: np.ndarray
    ratio: np.ndarray
    estado: EstadoTrayectoria = EstadoTrayectoria.COMPLETED
    t_evento: Optional[float] = None
    # Intervalos de la malla integrados con subpasos porque una etapa salió de int(C).
    subdivididos: int = 0

    @property
    def status(self) -> str:
        if self.estado is EstadoTrayectoria.COMPLETED:
            return self.estado.value
        return f"{self.estado.value}(t={self.t_evento:.6g})"

    @property
    def completada(self) -> bool:
        return self.estado is EstadoTrayectoria.COMPLETED

    def __len__(self) -> int:
        return int(self.times.size)


@dataclass(frozen=True)
class Metrics:
    min_b: float
    max_ratio: float
    input_mse: float
    sup_input_norm: float


def rk4_step(derivative: Callable[[float, np.ndarray], np.ndarray], t: float, x, h: float) -> np.ndarray:
    if not h > 0:
        raise ValueError(f"El paso debe ser positivo (h={h})")
    x = np.asarray(x, dtype=float)
    k1 = _etapa(derivative, t, x, t)
    k2 = _etapa(derivative, t + 0.5 * h, x + 0.5 * h * k1, t)
    k3 = _etapa(derivative, t + 0.5 * h, x + 0.5 * h * k2, t)
    k4 = _etapa(derivative, t + h, x + h * k3, t)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_step_subdividido(derivative: Callable[[float, np.ndarray], np.ndarray], t: float, x, h: float,
                         niveles: int = SUBDIVISIONES_MAX) -> Tuple[np.ndarray, int]:
    """
    Avanza x de t a t+h. Si alguna etapa cae fuera del dominio del controlador (ErrorFueraDeEmbudo),
    repite el intervalo con 2, 4, ... 2**niveles subpasos iguales. Devuelve (x, subpasos usados).
    """
    if niveles < 0:
        raise ValueError(f"niveles debe ser >= 0 (niveles={niveles})")
    x = np.asarray(x, dtype=float)
    for nivel in range(niveles + 1):
        subpasos = 2 ** nivel
        sub = h / subpasos
        try:
            actual = x
            for j in range(subpasos):
                actual = rk4_step(derivative, t + j * sub, actual, sub)
            return actual, subpasos
        except ErrorFueraDeEmbudo:
            if nivel == niveles:
                raise


def _etapa(derivative, t: float, x: np.ndarray, t_paso: float) -> np.ndarray:
    k = np.asarray(derivative(t, x), dtype=float)
    if not np.all(np.isfinite(k)):
        raise Divergencia(t_paso)
    return k


def simulate_closed_loop(config: SimConfig) -> Trajectory:
    """
    Integra x' = F(x) + G(x) mu(t, H(x)) sobre la malla uniforme. El controlador solo ve (t, y).
    Controladores interiores: se detiene con violated(t) si b <= guard en un punto de la malla, o si una
    etapa RK4 sigue fuera de int(C) tras subdividir el intervalo. Estado no finito: diverged(t).
    """
    plant, mu = config.plant, config.controller
    boundary, reference = config.boundary, config.reference
    interior = getattr(mu, "interior", True)
    malla = config.malla

    y0 = plant.H(config.x0)
    if interior and in_safe_set(malla[0], y0, boundary, reference) is not SafeSetClass.INTERIOR:
        raise ValueError(
            f"La salida inicial y0={y0} no está en int(C); el controlador interior no está definido allí"
        )

    def derivada(t: float, x: np.ndarray) -> np.ndarray:
        return plant.derivada(x, mu(t, plant.H(x)))

    filas_x, filas_y, filas_u, bs, razones = [], [], [], [], []
    estado, t_evento = EstadoTrayectoria.COMPLETED, None
    subdivididos = 0
    x = config.x0.copy()
    for i, t in enumerate(malla):
        t = float(t)
        y = plant.H(x)
        b = barrier_value(t, y, boundary, reference)
        razon = float(np.linalg.norm(y - reference.y_r(t))) / boundary.psi(t)
        u = np.full(plant.m, np.nan)
        if interior and b <= config.guard:
            estado, t_evento = EstadoTrayectoria.VIOLATED, t
        else:
            try:
                u = np.asarray(mu(t, y), dtype=float)
            except ErrorFueraDeEmbudo:
                estado, t_evento = EstadoTrayectoria.VIOLATED, t
        filas_x.append(x)
        filas_y.append(y)
        filas_u.append(u)
        bs.append(b)
        razones.append(razon)
        if estado is not EstadoTrayectoria.COMPLETED or i == malla.size - 1:
            break
        try:
            x, subpasos = rk4_step_subdividido(derivada, t, x, float(malla[i + 1]) - t, config.subdivisiones_max)
            if subpasos > 1:
                subdivididos += 1
        except ErrorFueraDeEmbudo:
            estado, t_evento = EstadoTrayectoria.VIOLATED, t
        except (Divergencia, ErrorDominio):
            estado, t_evento = EstadoTrayectoria.DIVERGED, t
        if estado is not EstadoTrayectoria.COMPLETED:
            break

    n = len(bs)
    return Trajectory(
        times=np.array(malla[:n], dtype=float),
        x=np.array(filas_x),
        y=np.array(filas_y),
        u=np.array(filas_u),
        b=np.array(bs),
        ratio=np.array(razones),
        estado=estado,
        t_evento=t_evento,
        subdivididos=subdivididos,
    )


def _u_ref_sobre_malla(trayectoria: Trajectory, u_ref) -> np.ndarray:
    if u_ref is None:
        return np.zeros_like(trayectoria.u)
    return np.array([u_ref(float(t)) for t in trayectoria.times], dtype=float)


def compute_metrics(trayectoria: Trajectory, u_ref: Optional[Callable[[float], np.ndarray]] = None) -> Metrics:
    """input_mse = media sobre la malla de ||u(t) - u_r(t)||^2 (u_r = 0 si no se da)."""
    if not trayectoria.completada:
        raise ErrorMetricas(f"Métricas no disponibles: trayectoria {trayectoria.status}", estado=trayectoria.estado)
    diferencia = trayectoria.u - _u_ref_sobre_malla(trayectoria, u_ref)
    return Metrics(
        min_b=float(trayectoria.b.min()),
        max_ratio=float(trayectoria.ratio.max()),
        input_mse=float(np.mean(np.sum(diferencia ** 2, axis=1))),
        sup_input_norm=float(np.linalg.norm(trayectoria.u, axis=1).max()),
    )


def compare_runs(a: Metrics, b: Metrics) -> float:
    """Reducción relativa del MSE de entrada de b respecto de a."""
    if not a.input_mse > 0:
        raise ErrorReduccion(f"Reducción indefinida: MSE de referencia = {a.input_mse}")
    return 1.0 - b.input_mse / a.input_mse


def recovery_run(config: SimConfig) -> Tuple[Trajectory, Optional[float], bool]:
    """Devuelve (trayectoria, primer t con b > 0 o None, si sigue en int(C) desde entonces)."""
    if getattr(config.controller, "interior", True):
        raise ValueError("recovery_run necesita un controlador saturado (U_delta)")
    trayectoria = simulate_closed_loop(config)
    dentro = np.flatnonzero(trayectoria.b > 0)
    if dentro.size == 0:
        return trayectoria, None, False
    i = int(dentro[0])
    return trayectoria, float(trayectoria.times[i]), bool(np.all(trayectoria.b[i:] > 0))


def continuity_modulus(trayectoria: Trajectory) -> float:
    """max ||du|| / (||dy|| + |dt|) entre vecinos de la malla (estimación empírica)."""
    if len(trayectoria) < 2:
        return 0.0
    du = np.linalg.norm(np.diff(trayectoria.u, axis=0), axis=1)
    dy = np.linalg.norm(np.diff(trayectoria.y, axis=0), axis=1)
    dt = np.abs(np.diff(trayectoria.times))
    cocientes = du / (dy + dt)
    cocientes = cocientes[np.isfinite(cocientes)]
    return float(cocientes.max()) if cocientes.size else math.nan


# --- CSV ---

def cabecera_csv(n: int, m: int):
    return (["t"] + [f"x{i}" for i in range(1, n + 1)] + [f"y{i}" for i in range(1, m + 1)]
            + [f"u{i}" for i in range(1, m + 1)] + ["b", "ratio"])


def write_trajectory_csv(trayectoria: Trajectory, ruta) -> Path:
    """Una fila por punto de malla, 17 cifras significativas, escritura atómica."""
    ruta = Path(ruta)
    n, m = trayectoria.x.shape[1], trayectoria.y.shape[1]
    with escritura_atomica(ruta) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(cabecera_csv(n, m))
        for i in range(len(trayectoria)):
            fila = ([trayectoria.times[i]] + list(trayectoria.x[i]) + list(trayectoria.y[i])
                    + list(trayectoria.u[i]) + [trayectoria.b[i], trayectoria.ratio[i]])
            writer.writerow([format(float(v), ".17g") for v in fila])
    return ruta


def read_trajectory_csv(ruta) -> Trajectory:
    """Lee un CSV de trayectoria; el estado no se guarda en el archivo y se devuelve como completed."""
    ruta = Path(ruta)
    with open(ruta, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        cabecera = next(reader, None)
        if not cabecera or cabecera[0] != "t" or cabecera[-2:] != ["b", "ratio"]:
            raise ValueError(f"Cabecera de trayectoria inválida en {ruta}")
        n = sum(1 for c in cabecera if c.startswith("x"))
        m = sum(1 for c in cabecera if c.startswith("y"))
        if cabecera != cabecera_csv(n, m):
            raise ValueError(f"Cabecera de trayectoria inválida en {ruta}")
        datos = np.array([[float(v) for v in fila] for fila in reader if fila], dtype=float)
    if datos.size == 0:
        raise ValueError(f"{ruta} no contiene filas")
    return Trajectory(
        times=datos[:, 0],
        x=datos[:, 1:1 + n],
        y=datos[:, 1 + n:1 + n + m],
        u=datos[:, 1 + n + m:1 + n + 2 * m],
        b=datos[:, -2],
        ratio=datos[:, -1],
    )
