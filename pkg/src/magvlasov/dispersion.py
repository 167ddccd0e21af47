"""The dispersion function L(z,k), its z-derivative, stability margins and winding numbers.

Three independent evaluations are provided: the harmonic Bessel series
(k3 = 0), direct Laplace quadrature of the time kernel, and boundary
values on the imaginary axis from principal-value velocity integrals.  A
closed form through the Faddeeva function serves as a fourth reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import wofz

from .kernels import kernel_collisional, kernel_collisionless, log_propagator_s
from .model import Equilibrium, ModeContext, PlasmaParams, third_diagonal
from .specfun import bessel_i_scaled_table, harmonic_cutoff, scaled_tail_bound

EPS = np.finfo(float).eps
POLE_DISTANCE = 1e-12


class PoleProximityError(ValueError):
    """z lies within 1e-12 of a cyclotron harmonic."""


class NonDecayingIntegrand(ValueError):
    """The shifted Laplace integrand does not decay."""


class ContourThroughZero(RuntimeError):
    """|1 - L| fell below 1e-8 on the sampled contour."""


@dataclass(frozen=True)
class DispersionSample:
    z: complex
    k: ModeContext
    value: complex
    method: str
    est_error: float


def _require_transverse(mode: ModeContext):
    if mode.k3 != 0:
        raise ValueError("the Bessel series applies to k3 = 0 only")
    if mode.k_perp_sq == 0:
        raise ValueError("the Bessel series needs k_perp != 0")


def _check_poles(z: complex, wc: float, n_hi: int):
    y = z.imag / wc
    n = round(abs(y))
    if n >= 1 and abs(z - 1j * math.copysign(n * wc, y)) < POLE_DISTANCE:
        raise PoleProximityError(f"z = {z} is within {POLE_DISTANCE} of the harmonic {n} omega_c")


def _series_cutoff(mode: ModeContext, z: complex, tol: float, extra: float = 1.0) -> tuple[int, float]:
    wc = mode.omega_c
    c = abs(mode.coupling) * extra * 8.0 / 3.0
    n = harmonic_cutoff(mode.a_eff, tol / max(c, 1e-300))
    n = max(n, int(math.ceil(2.0 * abs(z) / wc)) + 1)
    return n, c * scaled_tail_bound(n + 1, mode.a_eff)


def l_series(z: complex, mode: ModeContext, params: PlasmaParams, tol: float = 1e-13) -> DispersionSample:
    """-(q/m) W_hat sum_n 2 n wc Itilde_n(a) n wc / (z^2 + n^2 wc^2)."""
    _require_transverse(mode)
    z = complex(z)
    wc = params.omega_c
    n_cut, tail = _series_cutoff(mode, z, tol)
    _check_poles(z, wc, n_cut)
    n = np.arange(1, n_cut + 1)
    ive = bessel_i_scaled_table(mode.a_eff, n_cut)[1:]
    terms = 2 * n * wc * ive * n * wc / (z * z + (n * wc) ** 2)
    value = -mode.coupling * np.sum(terms)
    rounding = 4 * EPS * abs(mode.coupling) * np.sum(np.abs(terms)) * math.sqrt(n_cut)
    return DispersionSample(z, mode, complex(value), "series", float(tail + rounding))


def dl_dz(z: complex, mode: ModeContext, params: PlasmaParams, tol: float = 1e-13) -> DispersionSample:
    """(q/m) W_hat sum_n 2 n wc Itilde_n n wc 2z / (z^2 + n^2 wc^2)^2."""
    _require_transverse(mode)
    z = complex(z)
    wc = params.omega_c
    n_cut, tail = _series_cutoff(mode, z, tol, extra=8.0 * max(abs(z), 1.0) / wc**2)
    _check_poles(z, wc, n_cut)
    n = np.arange(1, n_cut + 1)
    ive = bessel_i_scaled_table(mode.a_eff, n_cut)[1:]
    terms = 2 * n * wc * ive * n * wc * 2 * z / (z * z + (n * wc) ** 2) ** 2
    value = mode.coupling * np.sum(terms)
    rounding = 4 * EPS * abs(mode.coupling) * np.sum(np.abs(terms)) * math.sqrt(n_cut)
    return DispersionSample(z, mode, complex(value), "series", float(tail + rounding))


# --- axis evaluations parameterised by the offset from a harmonic -------------------------

class AxisSeries:
    """L(iy) and dL/dy near the imaginary axis, parameterised as y = wc (n + delta).

    m^2 - (n + delta)^2 is formed as ((m - n) - delta)(m + n + delta), so the
    value stays accurate however close delta is to 0 or 1.
    """

    def __init__(self, mode: ModeContext, n_hi: int, tol: float = 1e-15):
        _require_transverse(mode)
        self.mode = mode
        cut, _ = _series_cutoff(mode, 1j * mode.omega_c * (n_hi + 1), tol)
        self.n_cut = max(cut, n_hi + 2)
        self.m = np.arange(1, self.n_cut + 1)
        self.weights = 2.0 * self.m**2 * bessel_i_scaled_table(mode.a_eff, self.n_cut)[1:]

    def _gap(self, n: int, delta: float):
        return ((self.m - n) - delta) * (self.m + n + delta)

    def value(self, n: int, delta: float) -> float:
        """L(i wc (n + delta))."""
        return -self.mode.coupling * math.fsum(self.weights / self._gap(n, delta))

    def d_dy(self, n: int, delta: float) -> float:
        """d/dy L(iy) at y = wc (n + delta)."""
        gap = self._gap(n, delta)
        y = n + delta
        return -self.mode.coupling * math.fsum(self.weights * 2.0 * y / gap**2) / self.mode.omega_c

    def dz(self, sign: int, n: int, delta: float) -> complex:
        """dL/dz at z = sign * i wc (n + delta); L is even in z so its derivative is odd."""
        return sign * (-1j) * self.d_dy(n, delta)


def l_axis_offset(n: int, delta: float, mode: ModeContext, tol: float = 1e-15) -> float:
    return AxisSeries(mode, n, tol).value(n, delta)


def dl_dy_offset(n: int, delta: float, mode: ModeContext, tol: float = 1e-15) -> float:
    return AxisSeries(mode, n, tol).d_dy(n, delta)


# --- closed form through the Faddeeva function ----------------------------------------------

def _gauss_laplace(zeta, alpha):
    """int_0^inf exp(-zeta t - alpha t^2 / 2) dt and int_0^inf t exp(...) dt."""
    r = np.sqrt(2.0 * alpha)
    f0 = math.sqrt(math.pi) / r * wofz(1j * zeta / r)
    f1 = (1.0 - zeta * f0) / alpha
    return f0, f1


def l_faddeeva(z, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None, tol: float = 1e-14):
    """Closed-form L(z,k) for k3 != 0 and a Gaussian-mixture parallel equilibrium.

    Entire in z, so it also continues L into Re z < 0.
    """
    if mode.k3 == 0:
        raise ValueError("closed form needs k3 != 0")
    eq = eq or Equilibrium.maxwellian(params.t_par)
    z = np.asarray(z, dtype=complex)
    wc = params.omega_c
    n_cut = harmonic_cutoff(mode.a_eff, tol, weight_power=1) if mode.k_perp_sq else 0
    n = np.arange(-n_cut, n_cut + 1)
    ive = bessel_i_scaled_table(mode.a_eff, n_cut)[np.abs(n)]
    zeta = z[..., None] - 1j * n * wc
    total = np.zeros(zeta.shape, dtype=complex)
    for w, s in eq.components():
        f0, f1 = _gauss_laplace(zeta, s * mode.k3**2)
        total += w * ((n * wc / 1j) * f0 + mode.k3**2 * f1)
    out = -mode.coupling * np.sum(ive * total, axis=-1)
    return out if out.ndim else complex(out)


# --- numerical Laplace integral --------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)
_GL2_X, _GL2_W = np.polynomial.legendre.leggauss(24)


def _kernel_envelope(t, mode: ModeContext, params: PlasmaParams, eq: Equilibrium, collisional: bool):
    """Upper bound of |K(t)| used for the truncation tail."""
    nu, wc = params.nu, params.omega_c
    third = np.asarray(third_diagonal(t, nu if collisional else 0.0))
    perp = mode.k_perp_sq * np.minimum(third, (2 * nu + wc) / (nu * nu + wc * wc))
    par = mode.k3**2 * third
    f3 = sum(abs(w) * np.exp(-0.5 * s * (mode.k3 * third) ** 2) for w, s in eq.components())
    env = abs(mode.coupling) * (perp + par) * f3
    if collisional and nu > 0:
        env = env * np.exp(np.asarray(log_propagator_s(t, mode, params)))
    return env


def _asymptotic_rate(mode: ModeContext, params: PlasmaParams, collisional: bool) -> float:
    nu, wc = params.nu, params.omega_c
    if mode.k3 != 0:
        return math.inf if not collisional or nu == 0 else mode.k3**2 / nu
    if collisional and nu > 0:
        return 2 * nu * mode.k_perp_sq / (nu * nu + wc * wc)
    return 0.0


@dataclass
class LaplaceQuadrature:
    """Kernel sampled once on Gauss-Legendre panels; reusable across many z."""

    nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    nodes2: np.ndarray
    weights2: np.ndarray
    values2: np.ndarray
    t_max: float
    tail: float
    mode: ModeContext
    shift: float
    collisional: bool
    meta: dict = field(default_factory=dict)

    def __call__(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        v1 = np.exp(-np.multiply.outer(z, self.nodes)) @ (self.weights * self.values)
        v2 = np.exp(-np.multiply.outer(z, self.nodes2)) @ (self.weights2 * self.values2)
        return v1, np.abs(v1 - v2)


def laplace_quadrature(
    mode: ModeContext,
    params: PlasmaParams,
    eq: Equilibrium | None = None,
    collisional: bool = False,
    shift: float = 0.0,
    re_min: float = 0.0,
    im_max: float = 0.0,
    tol: float = 1e-12,
) -> LaplaceQuadrature:
    """Panels of width pi / max(wc, |Im z|) out to a truncation set by the kernel envelope."""
    eq = eq or Equilibrium.maxwellian(params.t_par)
    if shift < 0:
        raise ValueError("shift must be nonnegative")
    decay = re_min - shift + _asymptotic_rate(mode, params, collisional)
    if not decay > 0:
        raise NonDecayingIntegrand(
            f"shift {shift} with Re z >= {re_min} leaves a non-decaying integrand for k = {mode.k}"
        )
    wc = params.omega_c
    width = math.pi / max(wc, im_max, 1.0)
    if mode.k3:
        width = min(width, 0.5 / abs(mode.k3))

    def env(t):
        return _kernel_envelope(t, mode, params, eq, collisional) * np.exp((shift - re_min) * t)

    # march panel blocks until the remaining envelope integral is negligible
    t_max = 8.0 * width
    while True:
        tt = np.linspace(t_max, t_max * 4 + 50, 4001)
        tail = np.trapezoid(env(tt), tt) + float(env(tt[-1])) * (tt[-1] - tt[0])
        if tail < tol or t_max > 1e6:
            break
        t_max *= 1.5
    n_pan = int(math.ceil(t_max / width))
    edges = np.linspace(0.0, t_max, n_pan + 1)

    def build(x, w):
        mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
        half = 0.5 * (edges[1:] - edges[:-1])[:, None]
        nodes = (mid + half * x).ravel()
        weights = (half * w).ravel()
        if collisional and params.nu > 0:
            vals = kernel_collisional(nodes, mode, params, eq)
        else:
            vals = kernel_collisionless(nodes, mode, params, eq)
        return nodes, weights, np.asarray(vals) * np.exp(shift * nodes)

    n1, w1, v1 = build(_GL_X, _GL_W)
    n2, w2, v2 = build(_GL2_X, _GL2_W)
    return LaplaceQuadrature(n1, w1, v1, n2, w2, v2, t_max, float(tail), mode, shift, collisional,
                             {"panels": n_pan, "panel_width": width})


def l_laplace(
    z: complex,
    mode: ModeContext,
    params: PlasmaParams,
    eq: Equilibrium | None = None,
    collisional: bool = False,
    shift: float = 0.0,
    tol: float = 1e-12,
) -> DispersionSample:
    """int_0^inf e^{-zt} K(t) e^{shift t} dt by panel Gauss-Legendre quadrature."""
    z = complex(z)
    quad = laplace_quadrature(mode, params, eq, collisional, shift, z.real, abs(z.imag), tol)
    val, diff = quad(z)
    return DispersionSample(z, mode, complex(val[0]), "laplace_integral", float(diff[0] + quad.tail))


# --- boundary values on the imaginary axis --------------------------------------------------

_PV_X, _PV_W = np.polynomial.legendre.leggauss(40)
_OUT_X, _OUT_W = np.polynomial.legendre.leggauss(12)


def _composite(lo, hi, n_panels):
    """Composite Gauss-Legendre nodes on rows of intervals [lo, hi] (vectorised, empty if hi <= lo)."""
    length = np.maximum(hi - lo, 0.0)
    u = (np.arange(n_panels)[:, None] + 0.5 * (_OUT_X[None, :] + 1.0)).ravel() / n_panels
    w = np.tile(_OUT_W, n_panels) * 0.5 / n_panels
    nodes = lo[..., None] + length[..., None] * u
    weights = length[..., None] * w
    return nodes, weights


def _pv_integral(g, v_res, v_cut: float, window: float = 1.0, n_panels: int = 28):
    """PV int g(v) / (v - v_res) dv with the symmetric window subtracted analytically."""
    v_res = np.asarray(v_res, dtype=float)
    u = 0.5 * window * (_PV_X + 1.0)
    wu = 0.5 * window * _PV_W
    inner = np.sum(wu * (g(v_res[..., None] + u) - g(v_res[..., None] - u)) / u, axis=-1)
    lo_l = np.full_like(v_res, -v_cut)
    hi_l = np.minimum(v_res - window, v_cut)
    lo_r = np.maximum(v_res + window, -v_cut)
    hi_r = np.full_like(v_res, v_cut)
    total = inner
    for lo, hi in ((lo_l, hi_l), (lo_r, hi_r)):
        nodes, weights = _composite(lo, hi, n_panels)
        denom = nodes - v_res[..., None]
        denom = np.where(weights > 0, denom, 1.0)
        total = total + np.sum(np.where(weights > 0, weights * g(nodes) / denom, 0.0), axis=-1)
    return total


def l_boundary(omega, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None, tol: float = 1e-13):
    """L(i omega, k) for k3 != 0 from resonant-velocity and principal-value terms.

    For each harmonic n, with w' = omega - n wc and resonant velocity
    v_n = -w'/k3:
      F0 = pi f3(v_n)/|k3| - (i/k3) PV int f3/(v - v_n)
      k3^2 F1 = -i pi sgn(k3) f3'(v_n) - PV int f3'/(v - v_n)
    """
    if mode.k3 == 0:
        raise ValueError("boundary formula needs k3 != 0")
    eq = eq or Equilibrium.maxwellian(params.t_par)
    scalar = np.ndim(omega) == 0
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    wc, k3 = params.omega_c, mode.k3
    n_cut = harmonic_cutoff(mode.a_eff, tol, weight_power=1, floor=8) if mode.k_perp_sq else 0
    n = np.arange(-n_cut, n_cut + 1)
    ive = bessel_i_scaled_table(mode.a_eff, n_cut)[np.abs(n)]
    wp = omega[:, None] - n[None, :] * wc
    v_res = -wp / k3
    s_max = max(s for _, s in eq.components())
    v_cut = 14.0 * math.sqrt(s_max)
    pv0 = _pv_integral(eq.f3, v_res, v_cut)
    pv1 = _pv_integral(eq.f3_prime, v_res, v_cut)
    f0 = math.pi * eq.f3(v_res) / abs(k3) - 1j * pv0 / k3
    k3sq_f1 = -1j * math.pi * np.sign(k3) * eq.f3_prime(v_res) - pv1
    out = -mode.coupling * np.sum(ive * ((n * wc / 1j) * f0 + k3sq_f1), axis=-1)
    return complex(out[0]) if scalar else out


# --- stability margin and argument principle ------------------------------------------------

@dataclass(frozen=True)
class StabilityMargin:
    kappa: float
    argmin: complex
    lambda_max: float
    omega_max: float
    grid: tuple[int, int]
    k: tuple[int, int, int]


def stability_margin(
    mode: ModeContext,
    params: PlasmaParams,
    eq: Equilibrium | None = None,
    lambda_max: float = 2.0,
    omega_max: float = 20.0,
    grid: tuple[int, int] = (9, 161),
) -> StabilityMargin:
    """min |1 - L| over the rectangle 0 <= Re z <= lambda_max, |Im z| <= omega_max."""
    if mode.k3 == 0:
        raise ValueError("stability margin is defined for k3 != 0")
    eq = eq or Equilibrium.maxwellian(params.t_par)
    n_re, n_im = grid
    lam = np.linspace(0.0, lambda_max, n_re)
    om = np.linspace(-omega_max, omega_max, n_im)
    axis = 1.0 - l_boundary(om, mode, params, eq)
    vals = [np.abs(axis)]
    zs = [1j * om]
    if n_re > 1:
        quad = laplace_quadrature(mode, params, eq, re_min=lam[1], im_max=omega_max)
        zi = (lam[1:, None] + 1j * om[None, :]).ravel()
        lv, _ = quad(zi)
        vals.append(np.abs(1.0 - lv))
        zs.append(zi)
    vals = np.concatenate(vals)
    zs = np.concatenate(zs)
    j = int(np.argmin(vals))
    return StabilityMargin(float(vals[j]), complex(zs[j]), lambda_max, omega_max, (n_re, n_im), mode.k)


def winding_number(
    mode: ModeContext,
    params: PlasmaParams,
    eq: Equilibrium | None = None,
    omega_max: float = 40.0,
    n_samples: int = 2001,
) -> int:
    """Winding of omega -> 1 - L(i omega) about 0, closed through the right half plane where L -> 0."""
    om = np.linspace(-omega_max, omega_max, n_samples)
    w = 1.0 - l_boundary(om, mode, params, eq)
    if np.min(np.abs(w)) < 1e-8:
        j = int(np.argmin(np.abs(w)))
        raise ContourThroughZero(f"|1 - L| = {abs(w[j]):.2e} at omega = {om[j]:.6g}")
    phase = np.unwrap(np.angle(w))
    along = phase[-1] - phase[0]
    closing = np.angle(w[0] / w[-1])
    # traversal runs downward in omega when seen as the boundary of Re z > 0
    return -int(round((along + closing) / (2 * math.pi)))


def dispersion_table(zs, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None) -> np.ndarray:
    """Rows (re_z, im_z, re_L, im_L, |1 - L|) using the series for k3 = 0 and quadrature otherwise."""
    zs = np.asarray(zs, dtype=complex).ravel()
    if mode.k3 == 0:
        vals = np.array([l_series(z, mode, params).value for z in zs])
    else:
        vals = np.empty(zs.shape, dtype=complex)
        on_axis = zs.real == 0
        if on_axis.any():
            vals[on_axis] = l_boundary(zs[on_axis].imag, mode, params, eq)
        if (~on_axis).any():
            inner = zs[~on_axis]
            quad = laplace_quadrature(mode, params, eq, re_min=float(inner.real.min()),
                                      im_max=float(np.abs(inner.imag).max()))
            vals[~on_axis] = quad(inner)[0]
    return np.column_stack([zs.real, zs.imag, vals.real, vals.imag, np.abs(1.0 - vals)])
