import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magvlasov.dispersion import (
    NonDecayingIntegrand,
    PoleProximityError,
    dispersion_table,
    dl_dz,
    l_boundary,
    l_faddeeva,
    l_laplace,
    l_series,
    stability_margin,
    winding_number,
)
from magvlasov.model import Equilibrium, ModeContext, PlasmaParams


def _value(mode, params, z):
    return l_faddeeva(z, mode, params) if mode.k3 else l_series(z, mode, params).value


def test_matches_frozen_laplace_integrals(oracles, unit_params):
    for row in oracles["laplace_kernel"]:
        mode = ModeContext.from_k(row["k"], unit_params)
        z = complex(*row["z"])
        ref = complex(float(row["L"][0]), float(row["L"][1]))
        assert abs(_value(mode, unit_params, z) - ref) < 1e-12 * abs(ref)


@pytest.mark.parametrize("k", [(1, 0, 0), (2, 1, 0), (1, 0, 1), (0, 0, 2)])
def test_numerical_laplace_agrees_with_closed_forms(k, unit_params):
    mode = ModeContext.from_k(k, unit_params)
    for z in (0.3 + 0.2j, 1.5 - 4.0j):
        sample = l_laplace(z, mode, unit_params)
        assert sample.value == pytest.approx(_value(mode, unit_params, z), abs=1e-11)


def test_boundary_values_continue_closed_form():
    params = PlasmaParams(b=0.8)
    eq = Equilibrium(1.0, ((0.1, 0.3),))
    for k in [(0, 0, 1), (1, 1, 1), (2, 0, -1)]:
        mode = ModeContext.from_k(k, params)
        om = np.linspace(-7, 7, 57)
        np.testing.assert_allclose(l_boundary(om, mode, params, eq), l_faddeeva(1j * om, mode, params, eq),
                                   atol=1e-11)


def test_series_derivative(transverse, unit_params):
    z, h = 0.4 + 1.3j, 1e-5
    fd = (l_series(z + h, transverse, unit_params).value - l_series(z - h, transverse, unit_params).value) / (2 * h)
    assert dl_dz(z, transverse, unit_params).value == pytest.approx(fd, abs=1e-9)


def test_series_guards(transverse, unit_params):
    with pytest.raises(PoleProximityError):
        l_series(2j + 1e-14, transverse, unit_params)
    with pytest.raises(ValueError):
        l_series(1.0, ModeContext.from_k((0, 0, 1), unit_params), unit_params)
    with pytest.raises(NonDecayingIntegrand):
        l_laplace(0.0 + 1j, transverse, unit_params, shift=0.5)


@given(st.floats(0.05, 3.0), st.floats(-10.0, 10.0))
def test_series_conjugate_symmetry(re, im):
    params = PlasmaParams()
    mode = ModeContext.from_k((1, 1, 0), params)
    if min(abs(abs(im) - n) for n in range(0, 12)) < 1e-3 and re < 1e-3:
        return
    a = l_series(complex(re, im), mode, params).value
    b = l_series(complex(re, -im), mode, params).value
    assert a == pytest.approx(np.conj(b), abs=1e-13)


@given(st.floats(0.0, 3.0), st.floats(-15.0, 15.0), st.sampled_from([(0, 0, 1), (1, 0, 1), (2, 1, 2)]))
def test_maxwellian_real_half_plane_has_no_roots(re, im, k):
    params = PlasmaParams()
    mode = ModeContext.from_k(k, params)
    assert abs(1 - l_faddeeva(complex(re, im), mode, params)) > 0.5


def test_stability_margin_and_winding_repulsive(unit_params):
    for k in [(0, 0, 1), (1, 0, 1), (2, 2, 1)]:
        mode = ModeContext.from_k(k, unit_params)
        margin = stability_margin(mode, unit_params)
        assert margin.kappa > 0.5
        assert winding_number(mode, unit_params) == 0


def test_winding_detects_attractive_instability():
    params = PlasmaParams(q=5.0, b=0.2)
    mode = ModeContext.from_k((0, 0, 1), params, interaction_sign=-1.0)
    assert winding_number(mode, params) == 1
    # the growing root is real: 1 - L changes sign along the positive real axis
    assert (1 - l_faddeeva(0.0, mode, params)).real < 0 < (1 - l_faddeeva(5.0, mode, params)).real


def test_dispersion_table_columns(unit_params):
    mode = ModeContext.from_k((1, 0, 1), unit_params)
    rows = dispersion_table(np.array([0.5j, 0.2 + 0.5j]), mode, unit_params)
    assert rows.shape == (2, 5)
    np.testing.assert_allclose(rows[:, 4], np.abs(1 - (rows[:, 2] + 1j * rows[:, 3])))
