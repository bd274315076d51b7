#!/usr/bin/env python3
"""
Artefactos de los verbos de cbf_embudo.py:
- bloques de texto `clave: valor` (métricas y verificación),
- PDF del informe de verificación (fpdf2), Excel de métricas y trayectorias (openpyxl),
- gráfico SVG del embudo y de las entradas (matplotlib),
- CSV de muestras de la verificación.
Toda escritura de archivo es atómica (se escribe un temporal y se renombra).
"""
import csv
import io
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

# Número de círculos del embudo dibujados a lo largo de la referencia.
CIRCULOS_EMBUDO = 40
SALT_SVG = "cbf-embudo"


@contextmanager
def escritura_atomica(ruta, binario: bool = False):
    """Abre un temporal junto a `ruta` y lo renombra al cerrar sin errores."""
    ruta = Path(ruta)
    ruta.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{ruta.name}.", dir=str(ruta.parent))
    try:
        if binario:
            with os.fdopen(fd, "wb") as f:
                yield f
        else:
            with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
                yield f
        os.replace(tmp, ruta)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def _pdf_safe(s: str, max_len: int = 120) -> str:
    """Texto seguro para PDF con Helvetica (sin Unicode especial: —, acentos, símbolos griegos...)."""
    if not s:
        return ""
    t = str(s)[:max_len]
    reemplazos = [
        ("—", "-"), ("–", "-"), ("´", "'"), ("’", "'"), ("‘", "'"),
        ("á", "a"), ("é", "e"), ("í", "i"), ("ó", "o"), ("ú", "u"),
        ("Á", "A"), ("É", "E"), ("Í", "I"), ("Ó", "O"), ("Ú", "U"),
        ("ñ", "n"), ("Ñ", "N"), ("ü", "u"), ("Ü", "U"),
        ("ψ", "psi"), ("ε", "eps"), ("δ", "delta"), ("α", "alpha"), ("η", "eta"),
        ("≤", "<="), ("≥", ">="), ("⊆", "in"), ("✓", "OK"), ("✗", "X"), ("⚠", "!"),
    ]
    for a, b in reemplazos:
        t = t.replace(a, b)
    return "".join(c if ord(c) < 128 else "?" for c in t)


def formatear(valor) -> str:
    if isinstance(valor, bool):
        return "si" if valor else "no"
    if isinstance(valor, (float, np.floating)):
        return format(float(valor), ".10g")
    if isinstance(valor, np.ndarray):
        return "[" + ", ".join(format(float(v), ".10g") for v in valor) + "]"
    if valor is None:
        return "ninguno"
    return str(valor)


def bloque_texto(titulo: str, campos: Dict[str, object]) -> str:
    lineas = [f"[{titulo}]"]
    lineas += [f"{clave}: {formatear(valor)}" for clave, valor in campos.items()]
    return "\n".join(lineas) + "\n"


def campos_metricas(metricas) -> Dict[str, object]:
    return {
        "min_b": metricas.min_b,
        "max_ratio": metricas.max_ratio,
        "input_mse": metricas.input_mse,
        "sup_input_norm": metricas.sup_input_norm,
    }


def guardar_texto(texto: str, ruta) -> None:
    with escritura_atomica(ruta) as f:
        f.write(texto)
    print(f"✓ Texto guardado: {ruta}")


def guardar_pdf_informe(titulo: str, texto: str, ruta) -> None:
    """Informe `clave: valor` en PDF, una línea por campo."""
    try:
        from fpdf import FPDF
    except ImportError:
        print("⚠ Para generar el PDF instala: pip install fpdf2")
        return
    pdf = FPDF()
    pdf.set_auto_page_break(auto=True, margin=12)
    pdf.add_page()
    pdf.set_font("Helvetica", "B", 14)
    pdf.cell(0, 10, _pdf_safe(titulo, 60), ln=True, align="C")
    pdf.ln(4)
    for linea in texto.splitlines():
        if linea.startswith("["):
            pdf.ln(2)
            pdf.set_font("Helvetica", "B", 10)
        else:
            pdf.set_font("Courier", "", 8)
        pdf.cell(0, 5, _pdf_safe(linea), ln=True)
    with escritura_atomica(ruta, binario=True) as f:
        f.write(bytes(pdf.output()))
    print(f"✓ PDF guardado: {ruta}")


def _guardar_libro(hojas: Sequence[Tuple[str, List[str], Iterable[Sequence]]], ruta) -> None:
    try:
        from openpyxl import Workbook
        from openpyxl.styles import Font
    except ImportError:
        print("⚠ Para exportar Excel instala: pip install openpyxl")
        return
    wb = Workbook()
    for i, (nombre, columnas, filas) in enumerate(hojas):
        ws = wb.active if i == 0 else wb.create_sheet()
        ws.title = nombre
        for c, col in enumerate(columnas, 1):
            cell = ws.cell(row=1, column=c, value=col)
            cell.font = Font(bold=True)
        for row_idx, fila in enumerate(filas, 2):
            for c, val in enumerate(fila, 1):
                ws.cell(row=row_idx, column=c, value=val)
        for col in ws.columns:
            ws.column_dimensions[col[0].column_letter].width = 14
    buffer = io.BytesIO()
    wb.save(buffer)
    with escritura_atomica(ruta, binario=True) as f:
        f.write(buffer.getvalue())
    print(f"✓ Excel guardado: {ruta}")


def guardar_excel_metricas(corridas: Sequence[Tuple[str, object]], ruta, reduccion: Optional[float] = None) -> None:
    """Una fila por corrida (nombre, métricas); si hay comparación, una hoja con la reducción."""
    columnas = ["escenario", "min_b", "max_ratio", "input_mse", "sup_input_norm"]
    filas = [[nombre] + [float(v) for v in campos_metricas(m).values()] for nombre, m in corridas]
    hojas = [("Metricas", columnas, filas)]
    if reduccion is not None:
        hojas.append(("Comparacion", ["base", "filtrado", "reduccion"],
                      [[corridas[0][0], corridas[1][0], float(reduccion)]]))
    _guardar_libro(hojas, ruta)


def guardar_excel_trayectoria(trayectoria, ruta) -> None:
    from simulacion import cabecera_csv
    n, m = trayectoria.x.shape[1], trayectoria.y.shape[1]
    filas = (
        [float(trayectoria.times[i])] + [float(v) for v in trayectoria.x[i]] + [float(v) for v in trayectoria.y[i]]
        + [float(v) for v in trayectoria.u[i]] + [float(trayectoria.b[i]), float(trayectoria.ratio[i])]
        for i in range(len(trayectoria))
    )
    _guardar_libro([("Trayectoria", cabecera_csv(n, m), filas)], ruta)


def guardar_muestras_csv(informe, ruta, m: int, n_eta: int) -> None:
    """Una fila por extremo evaluado: t, y, eta, k, margen."""
    columnas = (["t"] + [f"y{i}" for i in range(1, m + 1)] + [f"eta{i}" for i in range(1, n_eta + 1)]
                + ["k", "margin"])
    with escritura_atomica(ruta) as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columnas)
        for fila in informe.filas:
            valores = [fila.t, *fila.y, *fila.eta, fila.k, fila.margin]
            writer.writerow([format(float(v), ".17g") for v in valores])
    print(f"✓ CSV guardado: {ruta} ({len(informe.filas)} filas)")


def graficar_trayectoria(trayectoria, boundary, reference, ruta, u_ref=None, titulo: str = "") -> None:
    """Arriba: embudo como círculos de radio psi(t) sobre (y_r1, y_r2) y la salida. Abajo: entradas."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("⚠ Para generar el SVG instala: pip install matplotlib")
        return
    matplotlib.rcParams["svg.hashsalt"] = SALT_SVG

    ts = trayectoria.times
    fig, (ax_y, ax_u) = plt.subplots(2, 1, figsize=(7, 9), gridspec_kw={"height_ratios": [3, 2]})
    y_r = np.array([reference.y_r(float(t)) for t in ts])
    if trayectoria.y.shape[1] >= 2:
        indices = np.unique(np.linspace(0, len(ts) - 1, CIRCULOS_EMBUDO).astype(int))
        for i in indices:
            centro = (y_r[i, 0], y_r[i, 1])
            ax_y.add_patch(plt.Circle(centro, boundary.psi(float(ts[i])), fill=False, color="tab:blue", lw=0.6))
        ax_y.plot(y_r[:, 0], y_r[:, 1], "k--", lw=0.8, label="y_r")
        ax_y.plot(trayectoria.y[:, 0], trayectoria.y[:, 1], color="tab:red", lw=1.2, label="y")
        ax_y.set_aspect("equal", adjustable="datalim")
        ax_y.set_xlabel("y1")
        ax_y.set_ylabel("y2")
    else:
        psis = np.array([boundary.psi(float(t)) for t in ts])
        ax_y.fill_between(ts, y_r[:, 0] - psis, y_r[:, 0] + psis, color="tab:blue", alpha=0.2)
        ax_y.plot(ts, trayectoria.y[:, 0], color="tab:red", label="y")
        ax_y.set_xlabel("t")
    ax_y.legend(loc="upper right")
    ax_y.set_title(titulo)

    for j in range(trayectoria.u.shape[1]):
        linea, = ax_u.plot(ts, trayectoria.u[:, j], lw=1.0, label=f"u{j + 1}")
        if u_ref is not None:
            ref = np.array([u_ref(float(t))[j] for t in ts])
            ax_u.plot(ts, ref, ":", color=linea.get_color(), lw=1.0)
    ax_u.set_xlabel("t")
    ax_u.set_ylabel("u")
    ax_u.legend(loc="upper right")
    fig.tight_layout()

    buffer = io.StringIO()
    fig.savefig(buffer, format="svg", metadata={"Date": None})
    plt.close(fig)
    with escritura_atomica(ruta) as f:
        f.write(buffer.getvalue())
    print(f"✓ SVG guardado: {ruta}")
