import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from magvlasov.analysis import (
    NoCrossingError,
    ResolutionWarning,
    ScalingFit,
    bernstein_spectrum,
    envelope,
    first_crossing,
    fit_scaling,
    landau_norm,
    match_peaks,
    propagator_efolding,
    relaxation_exponent,
    relaxation_time,
)
from magvlasov.kernels import log_propagator_s
from magvlasov.model import InitialData, ModeContext, PlasmaParams
from magvlasov.volterra import TimeSeries, solve_mode

NUS = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6]


def test_fit_recovers_power_law():
    nus = np.array(NUS)
    fit = fit_scaling(nus, 3.0 * nus ** -0.4)
    assert fit.slope == pytest.approx(-0.4, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ScalingFit((1.0, 2.0), (1.0, 2.0), -1.0, 0.0, 1.0)


def test_efolding_is_root_of_log_propagator():
    params = PlasmaParams(nu=1e-3)
    mode = ModeContext.from_k((1, 1, 1), params)
    t = propagator_efolding(mode, params)
    assert log_propagator_s(t, mode, params) == pytest.approx(-1.0, abs=1e-12)
    with pytest.raises(NoCrossingError):
        propagator_efolding(mode, params, t_max=1.0)


@pytest.mark.parametrize("k,slope,tol", [((0, 0, 1), -1 / 3, 0.03), ((1, 0, 0), -1.0, 0.05)])
def test_threshold_halving_changes_slope_little(k, slope, tol):
    params = PlasmaParams()
    mode = ModeContext.from_k(k, params)
    full = relaxation_exponent(mode, params, NUS)
    half = relaxation_exponent(mode, params, NUS, threshold=0.5)
    assert abs(full.slope - slope) < tol
    assert abs(full.slope - half.slope) < 0.02


def test_forcing_source_relaxation_time():
    params = PlasmaParams(nu=1e-2)
    mode = ModeContext.from_k((0, 0, 1), params)
    data = InitialData.single((0, 0, 1))
    t = relaxation_time(mode, params, "forcing", data)
    assert 0 < t < 5.0
    with pytest.raises(NoCrossingError):
        relaxation_time(mode, params.with_nu(0.0), "forcing", data)


def test_envelope_and_crossing():
    dt = 0.01
    t = dt * np.arange(3001)
    x = np.exp(-0.1 * t) * np.cos(2 * t)
    env = envelope(x, dt, 2.0)
    assert np.all(env >= np.abs(x) - 1e-15)
    tc = first_crossing(t, np.exp(-0.1 * t), math.exp(-1))
    assert tc == pytest.approx(10.0, abs=1e-9)
    with pytest.raises(NoCrossingError):
        first_crossing(t, np.ones_like(t), 0.5)


def test_synthetic_two_line_spectrum():
    dt, n = 0.05, 8000
    t = dt * np.arange(n)
    x = np.exp(1.3j * t) + 0.3 * np.exp(-2.7j * t)
    spectrum = bernstein_spectrum(TimeSeries(dt, x))
    assert len(spectrum.peaks) == 2
    dist, ok = match_peaks(spectrum.peaks, [1.3, -2.7], spectrum.bin_width)
    assert ok.all()
    assert spectrum.amplitudes.max() == pytest.approx(1.0, rel=1e-3)


def test_resolution_warning():
    dt, n = 0.1, 500
    x = np.exp(1j * dt * np.arange(n))
    with pytest.warns(ResolutionWarning):
        spectrum = bernstein_spectrum(TimeSeries(dt, x), expected=[1.0, 1.01])
    assert spectrum.warnings


def _landau_series():
    params = PlasmaParams()
    mode = ModeContext.from_k((0, 0, 1), params)
    return solve_mode(mode, params, InitialData.single((0, 0, 1), center=(0, 0, 0.5)), 0.01, 10.0)


LANDAU = _landau_series()


@given(st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_landau_norm_monotone_in_sigma(s1, s2):
    lo, hi = sorted((s1, s2))
    assert landau_norm(LANDAU, lo) <= landau_norm(LANDAU, hi) * (1 + 1e-14)


@given(st.floats(0.0, 0.5))
def test_landau_norm_monotone_in_weights(rate):
    assert landau_norm(LANDAU, 0.5) <= landau_norm(LANDAU, 0.5, weights=lambda t: np.exp(rate * t)) * (1 + 1e-14)


def test_landau_norm_needs_parallel_mode(offcentre_data, transverse, unit_params):
    series = solve_mode(transverse, unit_params, offcentre_data, 0.1, 1.0)
    with pytest.raises(ValueError):
        landau_norm(series)


def test_spectral_amplitudes_track_residues():
    from scipy.stats import spearmanr

    from magvlasov.bernstein import residues

    params = PlasmaParams(q=4.0, b=0.25)
    mode = ModeContext.from_k((1, 0, 0), params)
    data = InitialData.single((1, 0, 0), center=(0.5, 0.3, 0.0))
    series = solve_mode(mode, params, data, 0.01, 400.0)
    dec = residues(mode, params, data, 8)
    spec = bernstein_spectrum(series)
    amp, weight = [], []
    for md in dec.modes:
        if md.has_root:
            amp.append(spec.value_at(md.b_n) + spec.value_at(-md.b_n))
            weight.append(abs(md.r_plus) + abs(md.r_minus))
    assert spearmanr(amp, weight).statistic > 0.9
