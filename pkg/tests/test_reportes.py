"""
Tests de reportes: escritura atómica, texto `clave: valor`, PDF, Excel y SVG.
Ejecutar desde la raíz del proyecto: pytest tests/ -v
"""
import tempfile
from types import SimpleNamespace
from unittest.mock import patch

import numpy as np
import pytest

import sys
from pathlib import Path
_raiz = Path(__file__).resolve().parent.parent
if str(_raiz) not in sys.path:
    sys.path.insert(0, str(_raiz))

from embudo import constant_reference, funnel_constant, malla_uniforme
from reportes import (
    _pdf_safe,
    bloque_texto,
    escritura_atomica,
    formatear,
    graficar_trayectoria,
    guardar_excel_metricas,
    guardar_muestras_csv,
    guardar_pdf_informe,
    guardar_texto,
)
from simulacion import Metrics, Trajectory
from verificacion import InclusionReport, MuestraInclusion


def _trayectoria():
    ts = np.linspace(0.0, 1.0, 11)
    y = np.column_stack([0.5 * np.exp(-ts), np.zeros_like(ts)])
    return Trajectory(times=ts, x=y.copy(), y=y, u=-y, b=0.5 * (1 - np.sum(y ** 2, axis=1)),
                      ratio=np.linalg.norm(y, axis=1))


class TestEscrituraAtomica:
    def test_escribe_y_renombra(self):
        with tempfile.TemporaryDirectory() as d:
            ruta = Path(d) / "sub" / "a.txt"
            with escritura_atomica(ruta) as f:
                f.write("hola\n")
            assert ruta.read_text(encoding="utf-8") == "hola\n"
            assert [p.name for p in ruta.parent.iterdir()] == ["a.txt"]

    def test_error_no_deja_rastro(self):
        with tempfile.TemporaryDirectory() as d:
            ruta = Path(d) / "a.txt"
            with pytest.raises(RuntimeError):
                with escritura_atomica(ruta) as f:
                    f.write("parcial")
                    raise RuntimeError("fallo")
            assert list(Path(d).iterdir()) == []


class TestTexto:
    def test_pdf_safe(self):
        assert _pdf_safe("Verificación ψ ≤ ε") == "Verificacion psi <= eps"
        assert _pdf_safe("") == ""

    def test_formatear(self):
        assert formatear(True) == "si"
        assert formatear(None) == "ninguno"
        assert formatear(0.1 + 0.2) == "0.3"
        assert formatear(np.array([1.0, 2.5])) == "[1, 2.5]"

    def test_bloque(self):
        texto = bloque_texto("metricas", {"min_b": 0.25, "estado": "completed"})
        assert texto == "[metricas]\nmin_b: 0.25\nestado: completed\n"

    def test_guardar_texto(self, capsys):
        with tempfile.TemporaryDirectory() as d:
            guardar_texto("x: 1\n", Path(d) / "m.txt")
            assert (Path(d) / "m.txt").read_text(encoding="utf-8") == "x: 1\n"
        assert "✓ Texto guardado" in capsys.readouterr().out


class TestMuestras:
    def test_csv(self):
        informe = InclusionReport(samples=1, violations=0, worst_margin=0.5)
        informe.filas.append(MuestraInclusion(0.5, np.array([0.1, 0.2]), np.array([0.3]), 1.0, 0.5))
        with tempfile.TemporaryDirectory() as d:
            ruta = Path(d) / "muestras.csv"
            guardar_muestras_csv(informe, ruta, m=2, n_eta=1)
            lineas = ruta.read_text(encoding="utf-8").splitlines()
        assert lineas[0] == "t,y1,y2,eta1,k,margin"
        assert lineas[1] == "0.5,0.10000000000000001,0.20000000000000001,0.29999999999999999,1,0.5"


class TestBackendsOpcionales:
    def test_pdf_sin_fpdf(self, capsys):
        with tempfile.TemporaryDirectory() as d:
            with patch.dict(sys.modules, {"fpdf": None}):
                guardar_pdf_informe("Informe", "[a]\nb: 1\n", Path(d) / "v.pdf")
            assert not (Path(d) / "v.pdf").exists()
        assert "pip install fpdf2" in capsys.readouterr().out

    def test_excel_sin_openpyxl(self, capsys):
        m = Metrics(0.1, 0.5, 1.0, 2.0)
        with tempfile.TemporaryDirectory() as d:
            with patch.dict(sys.modules, {"openpyxl": None}):
                guardar_excel_metricas([("a", m)], Path(d) / "m.xlsx")
            assert not (Path(d) / "m.xlsx").exists()
        assert "pip install openpyxl" in capsys.readouterr().out

    def test_pdf(self):
        pytest.importorskip("fpdf")
        with tempfile.TemporaryDirectory() as d:
            ruta = Path(d) / "v.pdf"
            guardar_pdf_informe("Verificación", "[resultado]\npasa: si\nψ_inf: 0.2\n", ruta)
            assert ruta.read_bytes().startswith(b"%PDF")

    def test_excel(self):
        openpyxl = pytest.importorskip("openpyxl")
        a, b = Metrics(0.1, 0.5, 2.0, 3.0), Metrics(0.2, 0.4, 0.5, 1.0)
        with tempfile.TemporaryDirectory() as d:
            ruta = Path(d) / "m.xlsx"
            guardar_excel_metricas([("a", a), ("b", b)], ruta, reduccion=0.75)
            wb = openpyxl.load_workbook(ruta)
        assert wb.sheetnames == ["Metricas", "Comparacion"]
        ws = wb["Metricas"]
        assert [c.value for c in ws[1]] == ["escenario", "min_b", "max_ratio", "input_mse", "sup_input_norm"]
        assert ws.cell(row=1, column=1).font.bold
        assert wb["Comparacion"].cell(row=2, column=3).value == 0.75

    def test_svg_determinista(self):
        pytest.importorskip("matplotlib")
        malla = malla_uniforme(0.0, 1.0, 0.1)
        boundary = funnel_constant(1.0, 1.0, malla)
        ref = constant_reference([0.0, 0.0], malla)
        with tempfile.TemporaryDirectory() as d:
            a, b = Path(d) / "a.svg", Path(d) / "b.svg"
            for ruta in (a, b):
                graficar_trayectoria(_trayectoria(), boundary, ref, ruta, u_ref=lambda t: np.zeros(2), titulo="x")
            assert a.read_bytes() == b.read_bytes()
            assert b"<svg" in a.read_bytes()
