"""
Tests de verificacion: pertenencia a K_CBF, inclusión de U en K_CBF, entrada testigo,
cota epsilon y su comprobación sobre la simulación del demo lineal.
Ejecutar desde la raíz del proyecto: pytest tests/ -v
"""
import math
from types import SimpleNamespace

import numpy as np
import pytest

import sys
from pathlib import Path
_raiz = Path(__file__).resolve().parent.parent
if str(_raiz) not in sys.path:
    sys.path.insert(0, str(_raiz))

from embudo import constant_reference, funnel_constant, malla_uniforme
from escenarios import cargar_escenario, resolver
from leyes_control import GainInterval
from plantas import ModelBounds, estimate_bounds, integrator_plant, linear_demo_q_bar
from simulacion import compute_metrics, simulate_closed_loop
from verificacion import (
    ClassKeLinear,
    alpha_from_bounds,
    corollary_invariance_check,
    endpoint_consistency_check,
    epsilon_bound,
    epsilon_hat,
    input_norm_bound,
    kcbf_membership,
    prop2_alpha,
    prop2_witness_check,
    theorem1_inclusion_check,
)

ESCENARIOS = _raiz / "escenarios"


def _cotas(f_bar=1.0, g_underbar=1.0, y_r_dot_sup=0.0):
    return ModelBounds(f_bar=f_bar, g_underbar=g_underbar, q_bar=0.0, radio_salida=1.0, radio_interno=0.0,
                       y_r_dot_sup=y_r_dot_sup)


@pytest.fixture
def integrador():
    malla = malla_uniforme(0.0, 5.0, 0.01)
    return integrator_plant(2), funnel_constant(1.0, 1.0, malla), constant_reference([0.0, 0.0], malla), malla


@pytest.fixture(scope="module")
def demo():
    res = resolver(cargar_escenario(ESCENARIOS / "demo_lineal.json"))
    q_bar = linear_demo_q_bar(res.boundary.psi_sup + res.reference.y_r_sup)
    bounds = estimate_bounds(res.forma_normal, res.boundary, res.reference, q_bar, 10_000, 0)
    return res, q_bar, bounds


class TestClassKeLinear:
    def test_pendiente_no_positiva(self):
        with pytest.raises(ValueError):
            ClassKeLinear(0.0)

    def test_alpha_ejemplo(self, integrador):
        _, _, ref, malla = integrador
        alpha = alpha_from_bounds(_cotas(), funnel_constant(1.0, 1.0, malla), GainInterval(1.0, 1.0))
        assert alpha.a == pytest.approx(1.0)
        assert alpha.M == pytest.approx(4.0)
        assert alpha.slope == pytest.approx(4.0)

    def test_monotona_en_f_bar(self, integrador):
        _, boundary, _, _ = integrador
        gains = GainInterval(1.0, 2.0)
        assert (alpha_from_bounds(_cotas(f_bar=2.0), boundary, gains).slope
                > alpha_from_bounds(_cotas(f_bar=1.0), boundary, gains).slope)

    def test_tangente_bajo_la_cota(self):
        alpha = ClassKeLinear(slope=4.0, a=1.0, M=4.0)
        assert alpha.cota_inferior(alpha.s0) == pytest.approx(alpha.tangente(alpha.s0))
        for s in np.linspace(0.01, 10.0, 200):
            assert alpha.cota_inferior(s) >= alpha.tangente(s) - 1e-12

    def test_prop2_alpha(self):
        assert prop2_alpha(2.0).slope == 8.0
        assert prop2_alpha(0.1).slope == 2.0


class TestKcbfMembership:
    def test_error_nulo(self, integrador):
        plant, boundary, ref, _ = integrador
        alpha = ClassKeLinear(3.0)
        for u in (np.array([5.0, -2.0]), np.array([-100.0, 7.0])):
            miembro, margen = kcbf_membership(1.0, np.zeros(2), np.zeros(0), u, alpha, plant, boundary, ref)
            assert miembro
            assert margen == pytest.approx(3.0 * 0.5)

    def test_empuja_hacia_afuera(self, integrador):
        plant, boundary, ref, _ = integrador
        miembro, margen = kcbf_membership(0.0, np.array([0.5, 0.0]), np.zeros(0), np.array([1.0, 0.0]),
                                          ClassKeLinear(1e-6), plant, boundary, ref)
        assert not miembro
        assert margen == pytest.approx(-0.5 + 1e-6 * 0.375)


class TestTheorem1Inclusion:
    def test_demo_lineal_sin_violaciones(self, demo):
        res, q_bar, bounds = demo
        alpha = alpha_from_bounds(bounds, res.boundary, res.gains)
        rep = theorem1_inclusion_check(res.forma_normal, res.boundary, res.reference, res.gains, alpha, q_bar,
                                       10_000, 0, res.horizonte)
        assert rep.samples == 10_000
        assert rep.violations == 0
        assert rep.worst_margin >= 0.0

    def test_extremos_consistentes(self, demo):
        res, q_bar, bounds = demo
        alpha = alpha_from_bounds(bounds, res.boundary, res.gains)
        assert endpoint_consistency_check(res.forma_normal, res.boundary, res.reference, res.gains, alpha, q_bar,
                                          1000, 1, res.horizonte) == 0

    def test_control_negativo(self, demo):
        res, q_bar, bounds = demo
        alpha = alpha_from_bounds(bounds, res.boundary, res.gains)
        debil = ClassKeLinear(alpha.slope * 1e-6)
        rep = theorem1_inclusion_check(res.forma_normal, res.boundary, res.reference, res.gains, debil, q_bar,
                                       2000, 0, res.horizonte, guardar_filas=True)
        assert rep.violations > 0
        assert rep.worst_margin < 0.0
        assert rep.witness is not None and rep.witness.margin == rep.worst_margin
        assert len(rep.filas) == 2 * rep.samples

    def test_sin_muestras(self, integrador):
        plant, boundary, ref, _ = integrador
        rep = theorem1_inclusion_check(plant, boundary, ref, GainInterval(1.0, 2.0), ClassKeLinear(1.0), 0.0, 0, 0,
                                       (0.0, 5.0))
        assert rep.samples == 0
        assert rep.violations == 0
        assert rep.worst_margin == math.inf

    def test_determinista(self, integrador):
        plant, boundary, ref, _ = integrador
        args = (plant, boundary, ref, GainInterval(1.0, 2.0), ClassKeLinear(10.0), 0.0, 300, 5, (0.0, 5.0))
        assert theorem1_inclusion_check(*args).worst_margin == theorem1_inclusion_check(*args).worst_margin


class TestProp2Witness:
    @pytest.mark.parametrize("archivo", ["demo_lineal.json", "integrador.json", "usv_cbf.json"])
    def test_margen_minimo(self, archivo):
        res = resolver(cargar_escenario(ESCENARIOS / archivo))
        q_bar = 0.0 if res.forma_normal.n_eta == 0 else linear_demo_q_bar(res.boundary.psi_sup + res.reference.y_r_sup)
        rep = prop2_witness_check(res.forma_normal, res.boundary, res.reference, q_bar, 1000, 0, res.horizonte)
        assert rep.violations == 0
        assert rep.worst_margin >= res.boundary.c * res.boundary.psi_inf ** 2 - 1e-9


class TestEpsilon:
    def test_r_uno(self):
        assert epsilon_hat(1.0) == pytest.approx(math.sqrt(0.5))
        assert epsilon_hat(1.0) == pytest.approx(0.70711, abs=1e-5)

    def test_r_nulo(self, integrador):
        _, boundary, ref, malla = integrador
        eps = epsilon_bound(_cotas(f_bar=0.0), boundary, ref, GainInterval(1.0, 2.0), 0.3, malla)
        assert eps == 0.3

    def test_e0_domina(self, integrador):
        _, boundary, ref, malla = integrador
        assert epsilon_bound(_cotas(f_bar=0.1), boundary, ref, GainInterval(1.0, 2.0), 0.9, malla) == 0.9

    def test_e0_invalido(self, integrador):
        _, boundary, ref, malla = integrador
        with pytest.raises(ValueError):
            epsilon_bound(_cotas(), boundary, ref, GainInterval(1.0, 2.0), 1.0, malla)

    def test_monotonia(self, integrador):
        _, boundary, ref, malla = integrador
        base = epsilon_bound(_cotas(f_bar=1.0), boundary, ref, GainInterval(1.0, 2.0), 0.0, malla)
        assert epsilon_bound(_cotas(f_bar=1.0), boundary, ref, GainInterval(2.0, 2.0), 0.0, malla) <= base
        assert epsilon_bound(_cotas(f_bar=1.0, g_underbar=2.0), boundary, ref, GainInterval(1.0, 2.0), 0.0, malla) <= base
        assert epsilon_bound(_cotas(f_bar=3.0), boundary, ref, GainInterval(1.0, 2.0), 0.0, malla) >= base


class TestCorollary:
    def test_demo_lineal(self, demo):
        res, _, bounds = demo
        y0 = res.planta.H(res.sim.x0)
        e0 = float(np.linalg.norm(y0 - res.reference.y_r(0.0))) / res.boundary.psi(0.0)
        eps = epsilon_bound(bounds, res.boundary, res.reference, res.gains, e0, res.malla)
        trayectoria = simulate_closed_loop(res.sim)
        assert trayectoria.completada
        cumple, max_razon = corollary_invariance_check(trayectoria, eps)
        assert cumple
        assert max_razon <= eps + 1e-6
        sup_u = compute_metrics(trayectoria, res.u_ref).sup_input_norm
        assert sup_u <= input_norm_bound(res.gains, res.boundary, eps) + 1e-6

    def test_punto_exterior(self):
        cumple, max_razon = corollary_invariance_check(SimpleNamespace(ratio=np.array([0.1, 0.5, 1.2])), 0.9)
        assert not cumple
        assert max_razon == 1.2

    def test_epsilon_casi_uno(self):
        cumple, _ = corollary_invariance_check(SimpleNamespace(ratio=np.array([0.1, 0.999])), 1 - 1e-9)
        assert cumple
