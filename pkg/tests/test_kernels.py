import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magvlasov.kernels import (
    AliasingError,
    forcing_collisional,
    forcing_collisionless,
    g_coefficients,
    kernel_collisional,
    kernel_collisionless,
    kernel_oracle,
    log_propagator_s,
    propagator_s,
    propagator_s_integral,
    readout_point,
)
from magvlasov.model import Equilibrium, InitialData, ModeContext, PlasmaParams, eta_ct

WAVEVECTORS = [(1, 0, 0), (0, 0, 1), (1, 2, 1), (3, 0, -2)]


def test_log_propagator_matches_frozen_quadrature(oracles):
    for row in oracles["log_propagator"]:
        params = PlasmaParams(nu=row["nu"])
        mode = ModeContext.from_k(row["k"], params)
        assert log_propagator_s(row["t"], mode, params) == pytest.approx(float(row["log_s"]), rel=1e-11)


@pytest.mark.parametrize("k", WAVEVECTORS)
def test_closed_kernel_equals_gradient_assembly(k):
    params = PlasmaParams(q=2.0, b=0.7)
    mode = ModeContext.from_k(k, params)
    t = np.linspace(0, 9, 37)
    np.testing.assert_allclose(kernel_collisionless(t, mode, params), kernel_oracle(t, mode, params),
                               atol=1e-15, rtol=1e-12)


@pytest.mark.parametrize("k", WAVEVECTORS)
def test_collisional_objects_reduce_at_zero_collisions(k):
    params = PlasmaParams()
    weak = params.with_nu(1e-13)
    mode = ModeContext.from_k(k, params)
    data = InitialData.single(k, center=(0.4, -0.1, 0.3))
    t = np.linspace(0, 12, 49)
    np.testing.assert_allclose(kernel_collisional(t, mode, weak), kernel_collisionless(t, mode, params),
                               atol=1e-11)
    np.testing.assert_allclose(forcing_collisional(t, mode, weak, data), forcing_collisionless(t, mode, params, data),
                               atol=1e-11)
    np.testing.assert_allclose(eta_ct(t, mode, params), readout_point(t, mode, params.omega_c), atol=1e-12)


def test_kernel_vanishes_at_zero():
    params = PlasmaParams(nu=0.3)
    for k in WAVEVECTORS:
        mode = ModeContext.from_k(k, params)
        assert kernel_collisionless(0.0, mode, params) == 0.0
        assert kernel_collisional(0.0, mode, params) == 0.0


def test_propagator_closed_form_against_quadrature():
    params = PlasmaParams(b=1.3, nu=0.05)
    mode = ModeContext.from_k((2, -1, 1), params)
    for t in (0.3, 4.0, 17.0):
        assert propagator_s(t, mode, params) == pytest.approx(propagator_s_integral(t, mode, params), rel=1e-10)


def test_propagator_underflow_flag():
    params = PlasmaParams(nu=1.0)
    mode = ModeContext.from_k((0, 0, 3), params)
    vals, flag = propagator_s(np.array([0.0, 500.0]), mode, params, return_flag=True)
    assert flag and vals[1] == 0.0 and vals[0] == 1.0


@given(st.floats(1e-6, 1.0), st.floats(0.0, 50.0), st.sampled_from(WAVEVECTORS))
def test_propagator_in_unit_interval_and_monotone(nu, t, k):
    params = PlasmaParams(nu=nu)
    mode = ModeContext.from_k(k, params)
    s0, s1 = propagator_s(np.array([t, t + 0.5]), mode, params)
    assert 0.0 <= s1 <= s0 <= 1.0


@given(st.floats(1e-7, 1e-2), st.floats(1e-3, 1.0))
def test_small_collision_expansion_of_log_propagator(nu, frac):
    """For k = (0,0,1): log S = -nu t^3/3 (1 - 3 nu t/4 + O((nu t)^2))."""
    params = PlasmaParams(nu=nu)
    mode = ModeContext.from_k((0, 0, 1), params)
    t = frac * 0.1 / nu
    if t == 0:
        return
    eps = log_propagator_s(t, mode, params) / (-nu * t**3 / 3) - 1
    x = nu * t
    assert abs(eps - (-0.75 * x + 0.35 * x * x)) < 0.2 * x**3 + 1e-9


def test_g_coefficients_reproduce_forcing(offcentre_data, transverse, unit_params):
    g = g_coefficients(transverse, unit_params, offcentre_data, 40, n_samples=256)
    t = np.linspace(0, 13, 101)
    np.testing.assert_allclose(g.evaluate(t), forcing_collisionless(t, transverse, unit_params, offcentre_data),
                               atol=1e-13)
    assert g.truncation < 1e-14


def test_g_coefficients_detect_aliasing(unit_params):
    mode = ModeContext.from_k((6, 0, 0), unit_params)
    data = InitialData.single((6, 0, 0), center=(3.0, 0.0, 0.0), widths=(0.2, 0.2, 1.0))
    with pytest.raises(AliasingError):
        g_coefficients(mode, unit_params, data, 8, n_samples=32)


def test_perturbed_equilibrium_kernel():
    eq = Equilibrium(1.0, ((0.2, 0.25),))
    params = PlasmaParams()
    mode = ModeContext.from_k((1, 0, 1), params)
    t = np.linspace(0, 6, 13)
    np.testing.assert_allclose(kernel_collisionless(t, mode, params, eq), kernel_oracle(t, mode, params, eq),
                               atol=1e-15, rtol=1e-12)
