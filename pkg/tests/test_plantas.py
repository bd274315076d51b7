"""
Tests de plantas: dinámica de las plantas de prueba, grado relativo uno, cotas del modelo
y entradas basadas en modelo.
Ejecutar desde la raíz del proyecto: pytest tests/ -v
"""
import math

import numpy as np
import pytest

import sys
from pathlib import Path
_raiz = Path(__file__).resolve().parent.parent
if str(_raiz) not in sys.path:
    sys.path.insert(0, str(_raiz))

from embudo import (
    constant_reference, funnel_constant, funnel_exponential, malla_uniforme, usv_reference, usv_y_r, usv_y_r_dot,
)
from errores import ErrorDominio, ErrorSupuestoEstructural
from plantas import (
    Caja,
    check_relative_degree_one,
    estimate_bounds,
    full_from_normal_form,
    integrator_plant,
    linear_demo_plant,
    linear_demo_q_bar,
    normal_form_from_identity_output,
    prop2_witness_input,
    usv_input_reference,
    usv_model_input_reference,
    usv_plant,
)
from simulacion import rk4_step


@pytest.fixture
def malla():
    return malla_uniforme(0.0, 10.0, 0.01)


class TestUsvPlant:
    def test_deriva_y_entrada(self):
        p = usv_plant()
        np.testing.assert_allclose(p.derivada(np.array([8.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0])), [1.0, 1.0, 0.0],
                                   atol=1e-15)

    def test_solo_deriva(self):
        p = usv_plant()
        np.testing.assert_allclose(p.derivada(np.array([8.0, 0.0, 0.0]), np.zeros(3)), [0.0, 1.0, 0.0], atol=1e-15)

    def test_deriva_unitaria(self):
        p = usv_plant()
        rng = np.random.default_rng(3)
        for x in rng.uniform(-10, 10, size=(200, 3)):
            assert np.linalg.norm(p.F(x)) == pytest.approx(1.0)

    def test_origen_fuera_de_dominio(self):
        with pytest.raises(ErrorDominio):
            usv_plant().F(np.array([0.0, 0.0, 0.3]))

    def test_forma_cuadratica(self):
        G = usv_plant().G(np.array([1.0, 2.0, 0.7]))
        z = np.array([0.3, -1.2, 0.5])
        assert float(z @ G @ z) == pytest.approx(math.cos(0.7) * (0.3 ** 2 + 1.2 ** 2) + 0.25)


class TestLinearDemo:
    def test_decaimiento_homogeneo(self):
        p = linear_demo_plant()
        eta = np.array([1.0])
        h = 1e-3
        for i in range(1000):
            eta = rk4_step(lambda t, e: p.q(np.zeros(2), e), i * h, eta, h)
        assert eta[0] == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_bibs(self):
        p = linear_demo_plant()
        y = np.array([2.0, 2.0])
        eta = np.array([0.0])
        h = 1e-2
        for i in range(2000):
            eta = rk4_step(lambda t, e: p.q(y, e), i * h, eta, h)
            assert abs(eta[0]) <= 2.0 + 1e-12
        assert linear_demo_q_bar(2.0) == 2.0
        assert linear_demo_q_bar(1.0, eta0=-3.0) == 3.0

    def test_forma_completa(self):
        full = full_from_normal_form(linear_demo_plant())
        x = np.array([0.4, -0.2, 1.0])
        u = np.array([0.1, 0.3])
        np.testing.assert_allclose(full.derivada(x, u), [-0.4 + 0.5 + 0.1, 0.2 + 0.5 + 0.3, -1.0 + 0.1])
        np.testing.assert_allclose(full.H(x), [0.4, -0.2])

    def test_jacobiano_de_salida(self):
        full = full_from_normal_form(linear_demo_plant())
        x = np.array([0.4, -0.2, 1.0])
        h = 1e-5
        fd = np.column_stack([(full.H(x + h * ei) - full.H(x - h * ei)) / (2 * h) for ei in np.eye(3)])
        np.testing.assert_allclose(full.H_jac(x), fd, atol=1e-5)

    def test_salida_no_identidad(self):
        with pytest.raises(ValueError):
            normal_form_from_identity_output(full_from_normal_form(linear_demo_plant()))


class TestRelativeDegree:
    def test_usv_caja_segura(self):
        caja = Caja(np.array([1.0, 1.0, -1.5]), np.array([9.0, 5.0, 1.5]))
        rep = check_relative_degree_one(usv_plant(), 500, caja)
        assert rep.pasa
        assert rep.min_autovalor == pytest.approx(math.cos(1.5), abs=1e-12)

    def test_usv_caja_del_tubo(self):
        # máximo |phi_r| en t = 10/3, donde psi ya vale casi 0.2
        phi_max = math.atan(3 * math.pi / 2) + 1.3 * math.exp(-20.0 / 3.0) + 0.2
        caja = Caja(np.array([-1.5, -5.5, -1.565]), np.array([9.5, 5.5, 1.565]))
        assert caja.superior[2] >= phi_max
        rep = check_relative_degree_one(usv_plant(), 500, caja)
        assert rep.pasa
        assert rep.min_autovalor == pytest.approx(math.cos(1.565), abs=1e-12)

    def test_usv_caja_amplia(self):
        caja = Caja(np.array([1.0, 1.0, -2.0]), np.array([9.0, 5.0, 2.0]))
        rep = check_relative_degree_one(usv_plant(), 500, caja)
        assert not rep.pasa
        assert rep.min_autovalor == pytest.approx(math.cos(2.0), abs=1e-12)

    def test_demo_lineal(self):
        caja = Caja(-2.0 * np.ones(3), 2.0 * np.ones(3))
        assert check_relative_degree_one(linear_demo_plant(), 200, caja).min_autovalor == pytest.approx(1.0)

    def test_dimension_incorrecta(self):
        with pytest.raises(ValueError):
            check_relative_degree_one(usv_plant(), 10, Caja(np.zeros(2), np.ones(2)))

    def test_caja_invertida(self):
        with pytest.raises(ValueError):
            Caja(np.ones(2), np.zeros(2))


class TestEstimateBounds:
    def test_demo_lineal(self, malla):
        boundary = funnel_constant(1.5, 1.0, malla)
        ref = constant_reference([0.3, 0.4], malla)
        bounds = estimate_bounds(linear_demo_plant(), boundary, ref, 2.0, 10_000)
        assert bounds.g_underbar == pytest.approx(0.95)
        assert bounds.radio_salida == pytest.approx(2.0)
        maximo = 2.0 + math.sqrt(2.0)
        assert bounds.f_bar / 1.05 <= maximo + 1e-9
        assert bounds.f_bar / 1.05 >= 0.999 * maximo

    def test_f_nula(self, malla):
        boundary = funnel_constant(1.0, 1.0, malla)
        ref = constant_reference([0.0, 0.0], malla)
        bounds = estimate_bounds(integrator_plant(2), boundary, ref, 0.0, 1000)
        assert bounds.f_bar == 0.0
        assert bounds.g_underbar == pytest.approx(0.95)

    def test_monotonia(self, malla):
        boundary = funnel_constant(1.5, 1.0, malla)
        ref = constant_reference([0.3, 0.4], malla)
        chica = estimate_bounds(linear_demo_plant(), boundary, ref, 1.0, 2000)
        grande = estimate_bounds(linear_demo_plant(), boundary, ref, 2.0, 2000)
        assert grande.f_bar >= chica.f_bar
        assert grande.g_underbar <= chica.g_underbar

    def test_usv_bola_no_definida(self, malla):
        boundary = funnel_exponential(1.3, 2.0, 0.2, 2.0, malla)
        nf = normal_form_from_identity_output(usv_plant())
        with pytest.raises(ErrorSupuestoEstructural):
            estimate_bounds(nf, boundary, usv_reference(malla), 0.0, 2000, region="ball")

    def test_usv_tubo(self, malla):
        boundary = funnel_exponential(1.3, 2.0, 0.2, 2.0, malla)
        ref = usv_reference(malla)
        nf = normal_form_from_identity_output(usv_plant())
        bounds = estimate_bounds(nf, boundary, ref, 0.0, 2000, region="tube", horizonte=(0.0, 10.0))
        assert bounds.g_underbar > 0
        assert bounds.f_bar == pytest.approx(1.05 * (1.0 + ref.y_r_dot_sup))
        assert bounds.region == "tube"

    def test_entradas_invalidas(self, malla):
        boundary = funnel_constant(1.0, 1.0, malla)
        ref = constant_reference([0.0, 0.0], malla)
        with pytest.raises(ValueError):
            estimate_bounds(integrator_plant(), boundary, ref, -1.0, 1000)
        with pytest.raises(ValueError):
            estimate_bounds(integrator_plant(), boundary, ref, 0.0, 999)
        with pytest.raises(ValueError):
            estimate_bounds(integrator_plant(), boundary, ref, 0.0, 1000, region="tube")


class TestEntradasDeModelo:
    def test_testigo_nulo(self, malla):
        ref = constant_reference([1.0, -1.0], malla)
        u = prop2_witness_input(integrator_plant(), 0.0, np.array([1.0, -1.0]), np.zeros(0), 1.0, ref)
        np.testing.assert_allclose(u, np.zeros(2))

    def test_testigo_demo(self, malla):
        ref = constant_reference([0.0, 0.0], malla)
        u = prop2_witness_input(linear_demo_plant(), 0.0, np.array([1.0, 0.0]), np.array([0.0]), 1.0, ref)
        np.testing.assert_allclose(u, [-1.0, 0.0])

    def test_testigo_g_singular(self, malla):
        p = integrator_plant()
        singular = p.__class__(m=2, n_eta=0, f=p.f, g=lambda y, eta: np.zeros((2, 2)), q=p.q, label="singular")
        with pytest.raises(ErrorSupuestoEstructural):
            prop2_witness_input(singular, 0.0, np.ones(2), np.zeros(0), 1.0, constant_reference([0.0, 0.0], malla))

    def test_u_r_en_cero(self):
        np.testing.assert_allclose(usv_input_reference(0.0), [-0.8, 0.0, 3 * math.pi / 2 * 3 * math.pi / 20],
                                   atol=1e-12)

    def test_u_r_cuarto_de_periodo(self):
        assert usv_input_reference(10.0 / 3.0)[2] == pytest.approx(0.0, abs=1e-12)

    def test_u_r_conserva_norma(self):
        for t in np.linspace(0.0, 10.0, 37):
            assert np.linalg.norm(usv_input_reference(t)) == pytest.approx(np.linalg.norm(usv_y_r_dot(t)))

    def test_u_r_modelo_en_cero(self):
        r = math.sqrt(80.0)
        np.testing.assert_allclose(usv_model_input_reference(0.0),
                                   [-0.8 + 4.0 / r, -8.0 / r, 3 * math.pi / 2 * 3 * math.pi / 20], atol=1e-12)

    def test_u_r_modelo_sigue_la_referencia(self):
        planta = usv_plant()
        for t in np.linspace(0.0, 9.9, 23):
            y_r = usv_y_r(t)
            np.testing.assert_allclose(planta.derivada(y_r, usv_model_input_reference(t)), usv_y_r_dot(t), atol=1e-12)
