#!/usr/bin/env python3
"""Excepciones de cbf-embudo."""


class ErrorDominio(ValueError):
    """Evaluación fuera del dominio de una función (p. ej. deriva del USV en el origen)."""


class ErrorFueraDeEmbudo(ErrorDominio):
    """Conjunto candidato U(t, y) pedido fuera de int(C)."""


class ErrorSupuestoEstructural(RuntimeError):
    """La planta no cumple el supuesto estructural (g no definida positiva o singular)."""


class ErrorMetricas(RuntimeError):
    """Métricas pedidas sobre una trayectoria que no terminó."""

    def __init__(self, mensaje: str, estado=None):
        super().__init__(mensaje)
        self.estado = estado


class ErrorReduccion(ZeroDivisionError):
    """Reducción de MSE indefinida (MSE de referencia nulo)."""


class Divergencia(ArithmeticError):
    """Valor no finito durante la integración."""

    def __init__(self, t: float, mensaje: str = ""):
        super().__init__(mensaje or f"Estado no finito en t={t:.6g}")
        self.t = t


class ErrorEscenario(ValueError):
    """Archivo de escenario ilegible, inválido o con etiquetas desconocidas."""
