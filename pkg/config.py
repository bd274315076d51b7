#!/usr/bin/env python3
"""Configuración numérica de cbf-embudo (embudo.py, leyes_control.py, plantas.py, verificacion.py, simulacion.py)."""
# Tolerancia absoluta para clasificar un punto sobre la frontera del embudo.
TOL_FRONTERA = 1e-12
# Paso de diferencias centrales cuando psi_dot o y_r_dot no son analíticas.
PASO_DIFERENCIAS = 1e-5
# Paso de la malla de validación de psi / y_r.
PASO_MALLA = 1e-2
# Se detiene la simulación si b(t, y) <= GUARDA_BARRERA con un controlador interior.
GUARDA_BARRERA = 1e-9
# Si una etapa RK4 cae fuera de int(C) se repite el intervalo con 2, 4, ... 2**SUBDIVISIONES_MAX subpasos.
SUBDIVISIONES_MAX = 4
# Factores de seguridad para las cotas muestreadas (f_bar se infla, g_underbar se desinfla).
FACTOR_INFLADO_F = 1.05
FACTOR_DEFLACION_G = 0.95
MUESTRAS_COTAS = 10_000
# ||e|| / psi se muestrea uniforme en [0, RAZON_MAX_MUESTREO).
RAZON_MAX_MUESTREO = 1.0 - 1e-6
TOL_COROLARIO = 1e-6
TOL_CONTENCION = 1e-9
TOL_TESTIGO = 1e-9
DIRECTORIO_SALIDA = "resultados"
