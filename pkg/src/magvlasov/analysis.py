"""Rate extraction and scaling fits on density time series."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize, signal, stats

from .kernels import forcing_collisional, log_propagator_s
from .model import InitialData, ModeContext, PlasmaParams
from .volterra import TimeSeries, solve_mode

SOURCES = ("propagator", "forcing", "full")


class NoCrossingError(RuntimeError):
    """The amplitude never fell below the threshold before t_max."""


class ResolutionWarning(UserWarning):
    """Two expected spectral lines fall inside one frequency bin."""


@dataclass(frozen=True)
class ScalingFit:
    nus: tuple[float, ...]
    t_e: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float
    threshold: float = 1.0

    def __post_init__(self):
        if len(self.nus) != len(self.t_e) or len(self.nus) < 4:
            raise ValueError("a scaling fit needs at least four (nu, t_e) pairs")
        if not 0.0 <= self.r_squared <= 1.0 + 1e-12:
            raise ValueError("r_squared outside [0, 1]")

    def table(self) -> np.ndarray:
        return np.column_stack([self.nus, self.t_e])


def fit_scaling(nus, t_e, threshold: float = 1.0) -> ScalingFit:
    """Least-squares slope of log t_e against log nu."""
    res = stats.linregress(np.log(nus), np.log(t_e))
    return ScalingFit(tuple(float(x) for x in nus), tuple(float(x) for x in t_e), float(res.slope),
                      float(res.intercept), float(min(res.rvalue**2, 1.0)), threshold)


def envelope(values, dt: float, omega_c: float) -> np.ndarray:
    """Running maximum of |x| over windows one gyration period wide."""
    width = max(1, int(round(2 * math.pi / (omega_c * dt))))
    return ndimage.maximum_filter1d(np.abs(values), size=width, mode="nearest")


def first_crossing(t: np.ndarray, amp: np.ndarray, level: float) -> float:
    """First time amp falls to ``level``, log-linearly interpolated between samples."""
    below = np.nonzero(amp <= level)[0]
    if below.size == 0:
        raise NoCrossingError(f"amplitude stays above {level:.3e} up to t = {t[-1]:.4g}")
    j = below[0]
    if j == 0:
        return float(t[0])
    a0, a1 = math.log(amp[j - 1]), math.log(max(amp[j], 1e-300))
    frac = (a0 - math.log(level)) / (a0 - a1) if a0 != a1 else 1.0
    return float(t[j - 1] + frac * (t[j] - t[j - 1]))


def propagator_efolding(mode: ModeContext, params: PlasmaParams, threshold: float = 1.0,
                        t_max: float | None = None) -> float:
    """Exact root of log S(t) = -threshold; log S is nonincreasing in t."""
    f = lambda t: float(log_propagator_s(t, mode, params)) + threshold
    hi = 1.0
    limit = t_max if t_max is not None else 1e3 / max(params.nu, 1e-300)
    while f(hi) > 0.0:
        hi *= 2.0
        if hi > limit:
            raise NoCrossingError(f"propagator stays above e^-{threshold} up to t = {limit:.4g}")
    return optimize.brentq(f, 0.0, hi, xtol=1e-14 * hi, rtol=1e-14)


def relaxation_time(mode: ModeContext, params: PlasmaParams, source: str = "propagator",
                    data: InitialData | None = None, threshold: float = 1.0, t_max: float | None = None,
                    dt: float | None = None) -> float:
    if source not in SOURCES:
        raise ValueError(f"source must be one of {SOURCES}")
    if source == "propagator":
        return propagator_efolding(mode, params, threshold, t_max)
    if data is None:
        raise ValueError(f"source={source!r} needs initial data")
    if params.nu == 0:
        raise NoCrossingError("no decay mechanism without collisions")
    t_max = t_max if t_max is not None else 20.0 / params.nu
    dt = dt or min(0.05, 0.1 / params.omega_c)
    if source == "forcing":
        t = dt * np.arange(int(round(t_max / dt)) + 1)
        vals = np.asarray(forcing_collisional(t, mode, params, data))
    else:
        series = solve_mode(mode, params, data, dt, t_max)
        t, vals = series.t, series.values
    env = envelope(vals, dt, params.omega_c)
    return first_crossing(t, env, math.exp(-threshold) * env[0])


def relaxation_exponent(mode: ModeContext, params: PlasmaParams, nus, source: str = "propagator",
                        data: InitialData | None = None, threshold: float = 1.0, **kw) -> ScalingFit:
    """Slope of log t_e against log nu for the chosen amplitude."""
    times = [relaxation_time(ModeContext.from_k(mode.k, params.with_nu(nu), mode.interaction_sign),
                             params.with_nu(nu), source, data, threshold, **kw) for nu in nus]
    return fit_scaling(nus, times, threshold)


def landau_norm(series: TimeSeries | list[TimeSeries], sigma: float = 0.0, weights=None) -> float:
    """|k3| sum_t dt (1 + |k|^2 + |k3 t|^2)^sigma w(t) |rho(t)|^2, summed over the given modes.

    ``weights`` is an optional callable or array multiplying the summand
    (for instance an exponential collisional shift).
    """
    items = series if isinstance(series, list) else [series]
    total = 0.0
    for s in items:
        if s.k is None:
            raise ValueError("landau_norm needs the mode attached to the series")
        k3 = s.k.k3
        if k3 == 0:
            raise ValueError("landau_norm needs k3 != 0")
        t = s.t
        w = np.ones_like(t) if weights is None else (weights(t) if callable(weights) else np.asarray(weights))
        total += abs(k3) * s.dt * float(np.sum((1 + s.k.k_sq + (k3 * t) ** 2) ** sigma * w * np.abs(s.values) ** 2))
    return total


@dataclass(frozen=True)
class LandauReport:
    value: float
    data_proxy: float
    ratio: float


def landau_report(series: TimeSeries, forcing: TimeSeries, sigma: float = 0.0, weights=None) -> LandauReport:
    """Norm of the solution next to the same norm of the free-streaming density."""
    val = landau_norm(series, sigma, weights)
    proxy = landau_norm(forcing, sigma, weights)
    return LandauReport(val, proxy, val / proxy if proxy > 0 else math.inf)


@dataclass
class Spectrum:
    omega: np.ndarray
    power: np.ndarray
    bin_width: float
    peaks: np.ndarray
    amplitudes: np.ndarray
    floor: float
    warnings: list[str] = field(default_factory=list)

    def value_at(self, omega: float) -> float:
        return float(np.interp(omega, self.omega, self.power))


def windowed_spectrum(series: TimeSeries, window: str = "hann", pad: int = 8) -> tuple[np.ndarray, np.ndarray, float]:
    """Amplitude spectrum in angular frequency, normalised so a unit line has height 1."""
    x = series.values
    n = len(x)
    win = signal.get_window(window, n, fftbins=False)
    transform = np.fft.fftshift(np.fft.fft(x * win, pad * n)) / win.sum()
    omega = np.fft.fftshift(np.fft.fftfreq(pad * n, series.dt)) * 2 * math.pi
    return omega, np.abs(transform), 2 * math.pi / (n * series.dt)


def bernstein_spectrum(series: TimeSeries, window: str = "hann", rel_floor: float = 1e-8,
                       expected=None, pad: int = 8, margin: float = 10.0) -> Spectrum:
    """Spectral lines of the windowed transform.

    Local maxima are visited from largest to smallest; one is accepted as a
    line when it exceeds ``margin`` times the window leakage that the lines
    already accepted put at its frequency, and ``rel_floor`` times the top.
    """
    omega, power, bw = windowed_spectrum(series, window, pad)
    n = len(series)
    win = signal.get_window(window, n, fftbins=False)
    kern = np.abs(np.fft.fft(win, pad * n)) / win.sum()
    half = kern[: pad * n // 2]
    dw = omega[1] - omega[0]
    leak = lambda d: np.interp(np.abs(d) / dw, np.arange(half.size), half, right=half[-1])
    floor = rel_floor * power.max()
    cand, _ = signal.find_peaks(power, height=floor)
    order = cand[np.argsort(power[cand])[::-1]]
    kept = []
    for j in order:
        bleed = sum(power[q] * leak(omega[j] - omega[q]) for q in kept)
        if power[j] > margin * bleed:
            kept.append(j)
    idx = np.sort(np.array(kept, dtype=int))
    notes = []
    if expected is not None:
        e = np.sort(np.asarray(expected, dtype=float))
        close = np.nonzero(np.diff(e) < bw)[0]
        for j in close:
            msg = f"lines {e[j]:.6g} and {e[j + 1]:.6g} lie within one bin ({bw:.3g})"
            notes.append(msg)
            warnings.warn(msg, ResolutionWarning)
    return Spectrum(omega, power, bw, omega[idx], power[idx], floor, notes)


def match_peaks(peaks, lines, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Distance from each peak to the nearest line, and which peaks lie within ``tol``."""
    lines = np.asarray(lines, dtype=float)
    dist = np.array([np.min(np.abs(lines - p)) for p in peaks]) if len(peaks) else np.zeros(0)
    return dist, dist <= tol
