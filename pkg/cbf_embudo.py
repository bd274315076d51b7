#!/usr/bin/env python3
"""
Línea de comandos de cbf-embudo.

    python cbf_embudo.py simulate escenarios/usv_cbf.json
    python cbf_embudo.py compare escenarios/usv_funnel.json escenarios/usv_cbf.json
    python cbf_embudo.py verify escenarios/demo_lineal.json
    python cbf_embudo.py export escenarios/usv_cbf.json resultados/usv_cbf/trayectoria.csv

Códigos de salida: 0 éxito, 1 corrida o verificación fallida, 2 escenario o entrada inválidos.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from embudo import gronwall_envelope_check, validate_funnel, validate_reference
from errores import ErrorEscenario, ErrorMetricas, ErrorReduccion, ErrorSupuestoEstructural
from escenarios import EscenarioResuelto, aplicar_overrides, campos_compartidos, cargar_escenario, resolver
from plantas import check_relative_degree_one, estimate_bounds, linear_demo_q_bar
from reportes import (
    bloque_texto, campos_metricas, escritura_atomica, graficar_trayectoria, guardar_excel_metricas,
    guardar_excel_trayectoria, guardar_muestras_csv, guardar_pdf_informe, guardar_texto,
)
from simulacion import (
    compare_runs, compute_metrics, continuity_modulus, read_trajectory_csv, recovery_run,
    simulate_closed_loop, write_trajectory_csv,
)
from verificacion import (
    alpha_from_bounds, corollary_invariance_check, endpoint_consistency_check, epsilon_bound,
    input_norm_bound, prop2_witness_check, theorem1_inclusion_check,
)

try:
    from config import TOL_COROLARIO
except ImportError:
    TOL_COROLARIO = 1e-6

SALIDA_OK, SALIDA_FALLO, SALIDA_INVALIDO = 0, 1, 2


def _cargar(ruta: str, args) -> EscenarioResuelto:
    escenario = cargar_escenario(ruta)
    escenario = aplicar_overrides(escenario, seed=args.seed, step=args.step, horizon=args.horizon,
                                  out_dir=args.out_dir)
    return resolver(escenario)


def _encabezado(titulo: str) -> None:
    print("=" * 60)
    print(titulo)
    print("=" * 60)


def _correr(res: EscenarioResuelto):
    """Simula; con controlador saturado informa además la entrada al conjunto seguro."""
    extra = {}
    if not res.controller.interior:
        spec = res.escenario.controlador
        print(f"  U_delta: delta={spec.delta}, k_min={spec.k_min}, k_max={spec.k_max}")
        trayectoria, entrada, permanece = recovery_run(res.sim)
        extra = {"entrada_en_C": entrada, "permanece_dentro": permanece}
        if entrada is None:
            print("  ⚠ La trayectoria no entra en int(C) dentro del horizonte")
        else:
            print(f"  Entra en int(C) en t={entrada:.6g}; permanece dentro: {'sí' if permanece else 'no'}")
    else:
        trayectoria = simulate_closed_loop(res.sim)
    return trayectoria, extra


def cmd_simulate(args) -> int:
    try:
        res = _cargar(args.escenario, args)
    except (ErrorEscenario, ValueError) as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO
    _encabezado(f"Simulación: {res.escenario.nombre}")
    try:
        trayectoria, extra = _correr(res)
    except ValueError as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO

    salida = res.escenario.directorio_salida
    write_trajectory_csv(trayectoria, salida / "trayectoria.csv")
    print(f"✓ CSV guardado: {salida / 'trayectoria.csv'} ({len(trayectoria)} filas)")
    campos = {"escenario": res.escenario.nombre, "estado": trayectoria.status, **extra}
    campos["intervalos_subdivididos"] = trayectoria.subdivididos
    if trayectoria.completada:
        metricas = compute_metrics(trayectoria, res.u_ref)
        campos.update(campos_metricas(metricas))
        campos["modulo_continuidad"] = continuity_modulus(trayectoria)
        guardar_excel_metricas([(res.escenario.nombre, metricas)], salida / "metricas.xlsx")
    texto = bloque_texto("metricas", campos)
    print(texto, end="")
    guardar_texto(texto, salida / "metricas.txt")
    if not args.no_plot:
        graficar_trayectoria(trayectoria, res.boundary, res.reference, salida / "trayectoria.svg",
                             u_ref=res.u_ref, titulo=res.escenario.nombre)
    if not trayectoria.completada:
        print(f"✗ Trayectoria {trayectoria.status}")
        return SALIDA_FALLO
    print("✓ Trayectoria completada")
    return SALIDA_OK


def cmd_compare(args) -> int:
    try:
        res_a = _cargar(args.escenario_a, args)
        res_b = _cargar(args.escenario_b, args)
    except (ErrorEscenario, ValueError) as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO
    comunes_a, comunes_b = campos_compartidos(res_a.escenario), campos_compartidos(res_b.escenario)
    distintos = sorted(k for k in comunes_a if comunes_a[k] != comunes_b[k])
    if distintos:
        print(f"✗ Los escenarios difieren en campos compartidos: {', '.join(distintos)}")
        return SALIDA_INVALIDO

    _encabezado(f"Comparación: {res_a.escenario.nombre} vs {res_b.escenario.nombre}")
    salida = Path(args.out_dir) if args.out_dir else res_b.escenario.directorio_salida.parent / "comparacion"
    corridas = []
    for res in (res_a, res_b):
        try:
            trayectoria, _ = _correr(res)
        except ValueError as e:
            print(f"✗ {e}")
            return SALIDA_INVALIDO
        write_trajectory_csv(trayectoria, salida / f"trayectoria_{res.escenario.nombre}.csv")
        try:
            metricas = compute_metrics(trayectoria, res.u_ref)
        except ErrorMetricas as e:
            print(f"✗ {res.escenario.nombre}: {e}")
            return SALIDA_FALLO
        print(bloque_texto(res.escenario.nombre, campos_metricas(metricas)), end="")
        corridas.append((res.escenario.nombre, metricas))
        if not args.no_plot:
            graficar_trayectoria(trayectoria, res.boundary, res.reference,
                                 salida / f"trayectoria_{res.escenario.nombre}.svg",
                                 u_ref=res.u_ref, titulo=res.escenario.nombre)
    try:
        reduccion = compare_runs(corridas[0][1], corridas[1][1])
    except ErrorReduccion as e:
        print(f"✗ {e}")
        return SALIDA_FALLO

    with escritura_atomica(salida / "comparacion.csv") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["escenario", "min_b", "max_ratio", "input_mse", "sup_input_norm"])
        for nombre, m in corridas:
            writer.writerow([nombre] + [format(float(v), ".17g") for v in campos_metricas(m).values()])
        writer.writerow(["reduccion", "", "", format(reduccion, ".17g"), ""])
    print(f"✓ CSV guardado: {salida / 'comparacion.csv'}")
    guardar_excel_metricas(corridas, salida / "metricas.xlsx", reduccion=reduccion)
    texto = bloque_texto("comparacion", {"base": corridas[0][0], "filtrado": corridas[1][0],
                                         "reduccion_mse_entrada": reduccion})
    print(texto, end="")
    guardar_texto(texto, salida / "comparacion.txt")
    return SALIDA_OK


def _q_bar(res: EscenarioResuelto) -> float:
    vf = res.escenario.verificacion
    if vf.q_bar is not None:
        return vf.q_bar
    if res.forma_normal.n_eta == 0:
        return 0.0
    if res.escenario.planta == "demo_lineal":
        return linear_demo_q_bar(res.boundary.psi_sup + res.reference.y_r_sup, vf.eta0)
    raise ErrorEscenario(f"La planta '{res.escenario.planta}' necesita verificacion.q_bar")


def ejecutar_verificacion(res: EscenarioResuelto):
    """Corre la batería de verificación. Devuelve (texto, pasa, informe de inclusión o None, check fallido o None)."""
    vf = res.escenario.verificacion
    plant, boundary, reference, gains = res.forma_normal, res.boundary, res.reference, res.gains
    horizonte = res.horizonte
    secciones = []

    val = validate_funnel(boundary, res.malla)
    cumple_gronwall, peor_gronwall = gronwall_envelope_check(boundary, res.malla)
    secciones.append(bloque_texto("embudo (evidencia sobre malla)", {
        "valido": val.valido, "max_psi_dot_sobre_psi": val.peor_razon, "c": boundary.c,
        "psi_inf": boundary.psi_inf, "psi_sup": boundary.psi_sup,
        "gronwall_cumple": cumple_gronwall, "gronwall_peor_exceso": peor_gronwall,
    }))

    coherencia = validate_reference(reference, res.malla)
    secciones.append(bloque_texto("referencia (evidencia sobre malla)", {
        "valida": coherencia.valido, "max_norma": coherencia.max_norma, "y_r_sup": reference.y_r_sup,
        "max_norma_dot": coherencia.max_norma_dot, "y_r_dot_sup": reference.y_r_dot_sup,
        "max_desvio_fd": coherencia.max_desvio_fd, "t_desvio_fd": coherencia.t_desvio_fd,
    }))
    if not coherencia.valido:
        return "".join(secciones), False, None, "validate_reference"

    grado = check_relative_degree_one(res.planta, vf.muestras_grado_relativo, res.caja(), vf.seed)
    secciones.append(bloque_texto("check_relative_degree_one", {
        "min_autovalor": grado.min_autovalor, "x_peor": grado.x_peor, "muestras": grado.muestras,
        "pasa": grado.pasa,
    }))
    if not grado.pasa:
        return "".join(secciones), False, None, "check_relative_degree_one"

    q_bar = _q_bar(res)
    try:
        bounds = estimate_bounds(plant, boundary, reference, q_bar, vf.muestras_cotas, vf.seed,
                                 region=vf.region, horizonte=horizonte)
    except ErrorSupuestoEstructural as e:
        secciones.append(bloque_texto("estimate_bounds", {"error": str(e)}))
        return "".join(secciones), False, None, "estimate_bounds"
    secciones.append(bloque_texto("estimate_bounds", {
        "region": bounds.region, "f_bar": bounds.f_bar, "g_underbar": bounds.g_underbar, "q_bar": bounds.q_bar,
        "radio_salida": bounds.radio_salida, "y_r_dot_sup": bounds.y_r_dot_sup,
    }))

    alpha = alpha_from_bounds(bounds, boundary, gains)
    inclusion = theorem1_inclusion_check(plant, boundary, reference, gains, alpha, q_bar, vf.muestras,
                                         vf.seed, horizonte, guardar_filas=True)
    discrepancias = endpoint_consistency_check(plant, boundary, reference, gains, alpha, q_bar,
                                               vf.muestras_consistencia, vf.seed, horizonte)
    secciones.append(bloque_texto("theorem1_inclusion_check", {
        "alpha_pendiente": alpha.slope, "a": alpha.a, "M": alpha.M, "k_min": gains.k_min, "k_max": gains.k_max,
        "muestras": inclusion.samples, "violaciones": inclusion.violations, "peor_margen": inclusion.worst_margin,
        "discrepancias_extremos": discrepancias,
    }))

    testigo = prop2_witness_check(plant, boundary, reference, q_bar, vf.muestras_testigo, vf.seed, horizonte)
    secciones.append(bloque_texto("prop2_witness_check", {
        "muestras": testigo.samples, "violaciones": testigo.violations, "peor_margen": testigo.worst_margin,
        "umbral": testigo.umbral,
    }))

    pasa = inclusion.pasa and discrepancias == 0 and testigo.pasa
    fallo = None if pasa else "theorem1_inclusion_check/prop2_witness_check"

    x0 = res.sim.x0
    e0 = float(np.linalg.norm(res.planta.H(x0) - reference.y_r(horizonte[0]))) / boundary.psi(horizonte[0])
    if e0 < 1.0 and res.controller.interior:
        eps = epsilon_bound(bounds, boundary, reference, gains, e0, res.malla)
        trayectoria = simulate_closed_loop(res.sim)
        campos = {"e0_ratio": e0, "epsilon": eps, "nota": "f_bar ya incluye y_r_dot_sup y se suma de nuevo",
                  "estado": trayectoria.status}
        if trayectoria.completada:
            cumple, max_razon = corollary_invariance_check(trayectoria, eps)
            cota_u = input_norm_bound(gains, boundary, eps)
            sup_u = compute_metrics(trayectoria, res.u_ref).sup_input_norm
            cumple_u = sup_u <= cota_u + TOL_COROLARIO
            campos.update({"max_ratio": max_razon, "invariancia_cumple": cumple,
                           "sup_input_norm": sup_u, "cota_entrada": cota_u, "cota_entrada_cumple": cumple_u})
            if not (cumple and cumple_u):
                pasa, fallo = False, fallo or "corollary_invariance_check"
        else:
            pasa, fallo = False, fallo or "corollary_invariance_check"
        secciones.append(bloque_texto("corollary_invariance_check", campos))
    else:
        secciones.append(bloque_texto("corollary_invariance_check", {
            "e0_ratio": e0, "aplica": False,
        }))
    secciones.append(bloque_texto("resultado", {"pasa": pasa, "fallo": fallo}))
    return "".join(secciones), pasa, inclusion, fallo


def cmd_verify(args) -> int:
    try:
        res = _cargar(args.escenario, args)
    except (ErrorEscenario, ValueError) as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO
    _encabezado(f"Verificación: {res.escenario.nombre}")
    try:
        texto, pasa, inclusion, fallo = ejecutar_verificacion(res)
    except ErrorEscenario as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO
    salida = res.escenario.directorio_salida
    print(texto, end="")
    guardar_texto(texto, salida / "verificacion.txt")
    guardar_pdf_informe(f"Verificacion: {res.escenario.nombre}", texto, salida / "verificacion.pdf")
    if inclusion is not None:
        guardar_muestras_csv(inclusion, salida / "muestras_inclusion.csv", res.forma_normal.m,
                             res.forma_normal.n_eta)
    if not pasa:
        print(f"✗ Falla: {fallo}")
        return SALIDA_FALLO
    print("✓ Todas las comprobaciones pasan")
    return SALIDA_OK


def cmd_export(args) -> int:
    try:
        res = _cargar(args.escenario, args)
        trayectoria = read_trajectory_csv(args.trayectoria)
    except (ErrorEscenario, ValueError, OSError) as e:
        print(f"✗ {e}")
        return SALIDA_INVALIDO
    salida = res.escenario.directorio_salida
    graficar_trayectoria(trayectoria, res.boundary, res.reference, salida / "trayectoria.svg",
                         u_ref=res.u_ref, titulo=res.escenario.nombre)
    guardar_excel_trayectoria(trayectoria, salida / "trayectoria.xlsx")
    return SALIDA_OK


def construir_parser() -> argparse.ArgumentParser:
    comunes = argparse.ArgumentParser(add_help=False)
    comunes.add_argument("--seed", type=int, default=None, help="Semilla (sobreescribe el escenario)")
    comunes.add_argument("--step", type=float, default=None, help="Paso de integración h")
    comunes.add_argument("--horizon", type=float, default=None, help="Duración de la simulación")
    comunes.add_argument("--out-dir", default=None, help="Directorio de salida (default: resultados/<nombre>)")
    comunes.add_argument("--no-plot", action="store_true", help="No generar el SVG")

    parser = argparse.ArgumentParser(
        description="Control sin modelo con funciones barrera de control sobre embudos"
    )
    sub = parser.add_subparsers(dest="verbo", required=True)
    p = sub.add_parser("simulate", parents=[comunes], help="Simula un escenario y guarda CSV, métricas y SVG")
    p.add_argument("escenario")
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("compare", parents=[comunes], help="Compara el MSE de entrada de dos escenarios")
    p.add_argument("escenario_a")
    p.add_argument("escenario_b")
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("verify", parents=[comunes], help="Verificación numérica con el modelo de la planta")
    p.add_argument("escenario")
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("export", parents=[comunes], help="Regenera SVG y Excel desde un CSV de trayectoria")
    p.add_argument("escenario")
    p.add_argument("trayectoria")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = construir_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
