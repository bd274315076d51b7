#!/usr/bin/env python3
"""
Escenarios JSON: esquema (pydantic), lectura, sobreescritura por flags y resolución de etiquetas
(planta, embudo, referencia, controlador, u_ref) a los objetos numéricos.
Esquema documentado en README_ESCENARIOS.md.
"""
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator

from embudo import (
    FunnelBoundary, ReferenceSignal, circular_reference, constant_reference, funnel_constant,
    funnel_exponential, malla_uniforme, usv_reference, validate_funnel, validate_reference,
)
from errores import ErrorEscenario
from leyes_control import (
    CbfFilterController, FunnelController, GainInterval, SaturatedFilterController, SaturationParam,
)
from plantas import (
    Caja, FullPlant, NormalFormPlant, full_from_normal_form, integrator_plant, linear_demo_plant,
    normal_form_from_identity_output, usv_input_reference, usv_model_input_reference, usv_plant,
)
from simulacion import SimConfig

try:
    from config import DIRECTORIO_SALIDA, MUESTRAS_COTAS, PASO_MALLA
except ImportError:
    DIRECTORIO_SALIDA = "resultados"
    MUESTRAS_COTAS = 10_000
    PASO_MALLA = 1e-2

TIPOS_CONTROLADOR = ("funnel", "cbf-filter", "saturated-filter")


# --- Esquema ---

class EmbudoSpec(BaseModel):
    forma: str = Field(..., description="exponencial | constante")
    amplitud: float = 1.0
    tasa: float = 1.0
    piso: float = 0.1
    valor: float = 1.0
    c: float = Field(..., gt=0, description="Cota |psi_dot| <= c psi")


class ReferenciaSpec(BaseModel):
    forma: str = Field(..., description="usv | constante | circular")
    valor: Optional[List[float]] = None
    radio: float = 1.0
    omega: float = 1.0


class ControladorSpec(BaseModel):
    tipo: str = Field(..., description="funnel | cbf-filter | saturated-filter")
    k: Optional[float] = None
    k_min: float = Field(..., gt=0)
    k_max: float = Field(..., gt=0)
    delta: Optional[float] = None
    u_ref: str = Field("cero", description="usv | usv_modelo | cero; fuente de u_ref del filtro y de las métricas")

    @model_validator(mode="after")
    def _ganancias(self):
        if self.k_min > self.k_max:
            raise ValueError(f"k_min={self.k_min} > k_max={self.k_max}")
        if self.tipo == "funnel" and (self.k is None or not self.k_min <= self.k <= self.k_max):
            raise ValueError(f"El controlador funnel necesita k en [{self.k_min}, {self.k_max}] (k={self.k})")
        if self.tipo == "saturated-filter" and (self.delta is None or self.delta <= 0):
            raise ValueError(f"El filtro saturado necesita delta > 0 (delta={self.delta})")
        return self


class SimulacionSpec(BaseModel):
    t0: float = 0.0
    horizon: float = Field(..., gt=0)
    step: float = Field(..., gt=0)
    x0: List[float]
    seed: int = 0

    @model_validator(mode="after")
    def _paso(self):
        if self.step > self.horizon:
            raise ValueError(f"step={self.step} mayor que horizon={self.horizon}")
        return self


class CajaSpec(BaseModel):
    inferior: List[float]
    superior: List[float]

    @model_validator(mode="after")
    def _ordenada(self):
        if len(self.inferior) != len(self.superior):
            raise ValueError("inferior y superior deben tener la misma dimensión")
        if any(a > b for a, b in zip(self.inferior, self.superior)):
            raise ValueError("Caja desordenada: inferior > superior en alguna coordenada")
        return self


class VerificacionSpec(BaseModel):
    muestras: int = Field(10_000, ge=0, description="Muestras de la inclusión U ⊆ K_CBF")
    muestras_consistencia: int = Field(1000, ge=0)
    muestras_testigo: int = Field(1000, ge=0)
    muestras_cotas: int = Field(MUESTRAS_COTAS, ge=1000)
    muestras_grado_relativo: int = Field(1000, ge=1)
    q_bar: Optional[float] = Field(None, ge=0)
    eta0: float = 0.0
    seed: int = 0
    region: str = "ball"
    caja: Optional[CajaSpec] = None


class Scenario(BaseModel):
    nombre: str
    planta: str
    embudo: EmbudoSpec
    referencia: ReferenciaSpec
    controlador: ControladorSpec
    simulacion: SimulacionSpec
    verificacion: VerificacionSpec = VerificacionSpec()
    salida: Optional[str] = None

    @property
    def directorio_salida(self) -> Path:
        return Path(self.salida) if self.salida else Path(DIRECTORIO_SALIDA) / self.nombre


# --- Lectura y overrides ---

def cargar_escenario(ruta) -> Scenario:
    ruta = Path(ruta)
    try:
        with open(ruta, encoding="utf-8") as f:
            datos = json.load(f)
    except FileNotFoundError as exc:
        raise ErrorEscenario(f"No se encontró el escenario {ruta}") from exc
    except json.JSONDecodeError as exc:
        raise ErrorEscenario(f"{ruta} no es JSON válido: {exc}") from exc
    try:
        return Scenario.model_validate(datos)
    except ValidationError as exc:
        raise ErrorEscenario(f"Escenario {ruta} inválido:\n{exc}") from exc


def aplicar_overrides(escenario: Scenario, seed: Optional[int] = None, step: Optional[float] = None,
                      horizon: Optional[float] = None, out_dir: Optional[str] = None) -> Scenario:
    """Flags de la línea de comandos sobre el escenario (se revalida el resultado)."""
    cambios_sim = {k: v for k, v in (("seed", seed), ("step", step), ("horizon", horizon)) if v is not None}
    cambios = {}
    if cambios_sim:
        cambios["simulacion"] = escenario.simulacion.model_copy(update=cambios_sim)
    if seed is not None:
        cambios["verificacion"] = escenario.verificacion.model_copy(update={"seed": seed})
    if out_dir is not None:
        cambios["salida"] = out_dir
    if not cambios:
        return escenario
    try:
        return Scenario.model_validate(escenario.model_copy(update=cambios).model_dump())
    except ValidationError as exc:
        raise ErrorEscenario(f"Overrides inválidos para {escenario.nombre}:\n{exc}") from exc


# --- Resolución de etiquetas ---

def _planta(escenario: Scenario):
    """(FullPlant para simular, NormalFormPlant para verificar)."""
    etiqueta = escenario.planta
    if etiqueta == "usv":
        full = usv_plant()
        return full, normal_form_from_identity_output(full)
    if etiqueta == "demo_lineal":
        normal = linear_demo_plant()
    elif etiqueta == "integrador":
        normal = integrator_plant(len(escenario.simulacion.x0))
    else:
        raise ErrorEscenario(f"Planta desconocida: '{etiqueta}' (disponibles: usv, demo_lineal, integrador)")
    return full_from_normal_form(normal), normal


def _embudo(spec: EmbudoSpec, malla) -> FunnelBoundary:
    if spec.forma == "exponencial":
        return funnel_exponential(spec.amplitud, spec.tasa, spec.piso, spec.c, malla)
    if spec.forma == "constante":
        return funnel_constant(spec.valor, spec.c, malla)
    raise ErrorEscenario(f"Forma de embudo desconocida: '{spec.forma}' (disponibles: exponencial, constante)")


def _referencia(spec: ReferenciaSpec, m: int, malla) -> ReferenceSignal:
    if spec.forma == "usv":
        return usv_reference(malla)
    if spec.forma == "constante":
        valor = spec.valor if spec.valor is not None else [0.0] * m
        return constant_reference(valor, malla)
    if spec.forma == "circular":
        return circular_reference(spec.radio, spec.omega, malla)
    raise ErrorEscenario(f"Referencia desconocida: '{spec.forma}' (disponibles: usv, constante, circular)")


def _u_ref(etiqueta: str, m: int) -> Callable[[float], np.ndarray]:
    if etiqueta == "usv":
        return usv_input_reference
    if etiqueta == "usv_modelo":
        return usv_model_input_reference
    if etiqueta == "cero":
        return lambda t: np.zeros(m)
    raise ErrorEscenario(f"Fuente de u_ref desconocida: '{etiqueta}' (disponibles: usv, usv_modelo, cero)")


def _controlador(spec: ControladorSpec, boundary, reference, gains: GainInterval, u_ref):
    if spec.tipo == "funnel":
        return FunnelController(boundary, reference, gains, spec.k)
    if spec.tipo == "cbf-filter":
        return CbfFilterController(boundary, reference, gains, u_ref)
    if spec.tipo == "saturated-filter":
        return SaturatedFilterController(boundary, reference, gains, SaturationParam(spec.delta), u_ref)
    raise ErrorEscenario(f"Controlador desconocido: '{spec.tipo}' (disponibles: {', '.join(TIPOS_CONTROLADOR)})")


@dataclass
class EscenarioResuelto:
    escenario: Scenario
    planta: FullPlant
    forma_normal: NormalFormPlant
    boundary: FunnelBoundary
    reference: ReferenceSignal
    gains: GainInterval
    controller: object
    u_ref: Callable[[float], np.ndarray]
    malla: np.ndarray
    sim: SimConfig

    @property
    def horizonte(self):
        s = self.escenario.simulacion
        return s.t0, s.t0 + s.horizon

    def caja(self) -> Caja:
        """Caja de la verificación; por defecto la bola de salida (y la de eta) en cada coordenada."""
        vf = self.escenario.verificacion
        if vf.caja is not None:
            return Caja(np.array(vf.caja.inferior), np.array(vf.caja.superior))
        radio = self.boundary.psi_sup + self.reference.y_r_sup
        q = vf.q_bar if vf.q_bar is not None else radio
        extremos = np.concatenate([np.full(self.forma_normal.m, radio), np.full(self.forma_normal.n_eta, q)])
        return Caja(-extremos, extremos)


def resolver(escenario: Scenario) -> EscenarioResuelto:
    """Construye los objetos del escenario; embudo y referencia deben validarse antes de cualquier corrida."""
    planta, normal = _planta(escenario)
    sim = escenario.simulacion
    if len(sim.x0) != planta.n:
        raise ErrorEscenario(f"x0 tiene dimensión {len(sim.x0)}, la planta '{escenario.planta}' espera {planta.n}")
    malla = malla_uniforme(sim.t0, sim.t0 + sim.horizon, min(PASO_MALLA, sim.step))
    boundary = _embudo(escenario.embudo, malla)
    validacion = validate_funnel(boundary, malla)
    if not validacion.valido:
        raise ErrorEscenario(
            f"El embudo no pertenece a la clase: max |psi_dot|/psi = {validacion.peor_razon:.4g} "
            f"en t={validacion.t_peor_razon:.4g} (c={boundary.c}), min psi = {validacion.psi_min:.4g}"
        )
    reference = _referencia(escenario.referencia, planta.m, malla)
    if reference.m != planta.m:
        raise ErrorEscenario(f"La referencia tiene dimensión {reference.m}, la planta espera m={planta.m}")
    coherencia = validate_reference(reference, malla)
    if not coherencia.valido:
        raise ErrorEscenario(
            f"Referencia incoherente: max |y_r_dot - diferencias centrales| = {coherencia.max_desvio_fd:.3g} "
            f"en t={coherencia.t_desvio_fd:.4g}, max |y_r| = {coherencia.max_norma:.4g}, "
            f"max |y_r_dot| = {coherencia.max_norma_dot:.4g}"
        )
    spec = escenario.controlador
    gains = GainInterval(spec.k_min, spec.k_max)
    u_ref = _u_ref(spec.u_ref, planta.m)
    controller = _controlador(spec, boundary, reference, gains, u_ref)
    config = SimConfig(
        plant=planta, controller=controller, x0=np.array(sim.x0, dtype=float),
        boundary=boundary, reference=reference, t0=sim.t0, horizon=sim.horizon, step=sim.step,
        u_ref=u_ref, seed=sim.seed, nombre=escenario.nombre,
    )
    return EscenarioResuelto(escenario, planta, normal, boundary, reference, gains, controller, u_ref, malla, config)


def campos_compartidos(escenario: Scenario) -> dict:
    """Campos que dos escenarios comparados deben compartir."""
    s = escenario.simulacion
    return {
        "planta": escenario.planta,
        "embudo": escenario.embudo.model_dump(),
        "referencia": escenario.referencia.model_dump(),
        "t0": s.t0,
        "horizon": s.horizon,
        "step": s.step,
        "u_ref": escenario.controlador.u_ref,
    }
