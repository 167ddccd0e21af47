"""Bernstein frequencies, residues and the standing-wave reconstruction for k3 = 0 modes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispersion import AxisSeries
from .kernels import GCoefficients, g_coefficients, readout_point
from .model import InitialData, ModeContext, PlasmaParams
from .volterra import TimeSeries


class BracketFailure(RuntimeError):
    """No sign change of L - 1 was found inside an inter-harmonic interval."""


class TailDominance(RuntimeError):
    """The truncated g-sequence does not meet the residue tolerance."""


@dataclass(frozen=True)
class BernsteinRoot:
    """b = n + offset in units of omega_c; the offset is kept separately since it can be below 1e-16."""

    n: int
    offset: float
    residual: float

    @property
    def b(self) -> float:
        return self.n + self.offset


@dataclass(frozen=True)
class BernsteinMode:
    n: int
    b_n: float
    offset: float
    r_plus: complex
    r_minus: complex
    has_root: bool = True


@dataclass
class ModeDecomposition:
    k: ModeContext
    omega_c: float
    modes: list[BernsteinMode]
    n_max: int
    truncation_estimate: float
    zero_interval_root: bool = False
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "k": list(self.k.k),
            "omega_c": self.omega_c,
            "modes": [
                {
                    "n": md.n,
                    "b_n": md.b_n,
                    "offset": md.offset,
                    "has_root": md.has_root,
                    "re_r_plus": md.r_plus.real,
                    "im_r_plus": md.r_plus.imag,
                    "re_r_minus": md.r_minus.real,
                    "im_r_minus": md.r_minus.imag,
                }
                for md in self.modes
            ],
            "tail_estimate": self.truncation_estimate,
            "zero_interval_root": self.zero_interval_root,
        }

    def truncated(self, n_keep: int) -> "ModeDecomposition":
        """Keep modes n <= n_keep."""
        kept = [md for md in self.modes if md.n <= n_keep]
        dropped = sum(abs(md.r_plus) + abs(md.r_minus) for md in self.modes if md.n > n_keep)
        return ModeDecomposition(self.k, self.omega_c, kept, n_keep, self.truncation_estimate + dropped,
                                 self.zero_interval_root, dict(self.meta))


def _root_in_interval(series: AxisSeries, n: int, tol: float, eps: float = 1e-9) -> BernsteinRoot:
    f = lambda d: series.value(n, d) - 1.0
    lo = eps
    while f(lo) <= 0.0:
        lo *= 0.1
        if lo < 1e-300:
            raise BracketFailure(f"no sign change next to harmonic {n}")
    gap_hi = eps
    while f(1.0 - gap_hi) >= 0.0:
        gap_hi *= 0.1
        if gap_hi < 1e-16:
            raise BracketFailure(f"no sign change next to harmonic {n + 1}")
    hi = 1.0 - gap_hi
    for _ in range(400):
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        fm = f(mid)
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2e-16 * hi or fm == 0.0:
            break
    d = 0.5 * (lo + hi)
    # Newton polish; dL/d(offset) = wc dL/dy
    for _ in range(2):
        slope = series.d_dy(n, d) * series.mode.omega_c
        step = f(d) / slope
        if lo <= d - step <= hi:
            d -= step
    res = abs(f(d))
    if res > tol:
        raise BracketFailure(f"root near harmonic {n} only reached |L-1| = {res:.2e}")
    return BernsteinRoot(n, d, res)


def find_modes(mode: ModeContext, params: PlasmaParams, n_max: int, tol: float = 1e-12) -> tuple[list[BernsteinRoot], bool]:
    """Roots b_n in (n, n+1), n = 1..n_max, and whether (0, 1) holds a root as well."""
    if mode.k3 != 0 or mode.k_perp_sq == 0:
        raise ValueError("Bernstein roots need k3 = 0 and k_perp != 0")
    series = AxisSeries(mode, n_max + 1)
    roots = [_root_in_interval(series, n, tol) for n in range(1, n_max + 1)]
    # on (0, 1) L starts finite at y = 0 and falls to -inf, so a root needs L(0) > 1
    zero_root = series.value(0, 0.0) > 1.0
    if zero_root:
        roots.insert(0, _root_in_interval_zero(series, tol))
    return roots, zero_root


def _root_in_interval_zero(series: AxisSeries, tol: float) -> BernsteinRoot:
    f = lambda d: series.value(0, d) - 1.0
    lo, hi = 0.0, 1.0 - 1e-12
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    d = 0.5 * (lo + hi)
    return BernsteinRoot(0, d, abs(f(d)))


def _on_circle_real(mode: ModeContext, params: PlasmaParams, data: InitialData, samples: int = 64) -> bool:
    t = 2 * math.pi * np.arange(samples) / (samples * params.omega_c)
    vals = data.profile(mode.k).hat(readout_point(t, mode, params.omega_c))
    return bool(np.max(np.abs(vals.imag)) <= 1e-14 * max(np.max(np.abs(vals)), 1e-300))


def _transform_numerator(g: GCoefficients, sign: int, n: int, delta: float) -> complex:
    """sum_m g_m / (z - i m wc) at z = sign i wc (n + delta)."""
    diff = (sign * n - g.n) + sign * delta
    return complex(np.sum(g.values / (1j * g.omega_c * diff)))


def residues(
    mode: ModeContext,
    params: PlasmaParams,
    data: InitialData,
    n_max: int,
    tol: float = 1e-12,
    g: GCoefficients | None = None,
    roots: list[BernsteinRoot] | None = None,
) -> ModeDecomposition:
    """Residues of F(z)/(1 - L(z)), F = Laplace transform of the passive density, at z = +-i wc b_n."""
    if roots is None:
        roots, zero_root = find_modes(mode, params, n_max, tol)
    else:
        zero_root = any(r.n == 0 for r in roots)
    if g is None:
        n_g = max(2 * n_max, 64)
        while True:
            g = g_coefficients(mode, params, data, n_g, n_samples=8 * n_g)
            scale = max(float(np.max(np.abs(g.values))), 1e-300)
            if g.truncation <= tol * scale or n_g >= 4096:
                break
            n_g *= 2
        if g.truncation > tol * scale:
            raise TailDominance(f"g-sequence tail {g.truncation:.2e} exceeds tolerance")
    series = AxisSeries(mode, n_max + 1)
    symmetric = _on_circle_real(mode, params, data)
    out: list[BernsteinMode] = []
    if not zero_root:
        dc = g[0] / (1.0 - series.value(0, 0.0))
        out.append(BernsteinMode(0, 0.0, 0.0, 0.5 * dc, 0.5 * dc, has_root=False))
    for root in roots:
        rs = []
        for sign in (1, -1):
            num = _transform_numerator(g, sign, root.n, root.offset)
            rs.append(num / (-series.dz(sign, root.n, root.offset)))
        r_plus, r_minus = rs
        if symmetric:
            r_plus = 0.5 * (r_plus + np.conj(r_minus))
            r_minus = np.conj(r_plus)
        out.append(BernsteinMode(root.n, root.b, root.offset, complex(r_plus), complex(r_minus)))
    beyond = np.abs(g.values[np.abs(g.n) > n_max]).sum()
    return ModeDecomposition(mode, params.omega_c, out, n_max, float(beyond + g.truncation), zero_root,
                             {"g_n_max": g.n_max, "symmetric": symmetric})


def removable_limit(ell: int, g: GCoefficients, mode: ModeContext) -> complex:
    """Finite value of F(z)/(1 - L(z)) as z -> i ell wc."""
    from .specfun import bessel_i_scaled

    ive = bessel_i_scaled(ell, mode.a_eff, 1e-17).value_scaled
    return 1j * g[ell] / (mode.coupling * ell * mode.omega_c * ive)


def transformed_density_offset(ell: int, delta: float, g: GCoefficients, mode: ModeContext) -> complex:
    """F(z)/(1 - L(z)) at z = i wc (ell + delta)."""
    series = AxisSeries(mode, ell + 1)
    num = _transform_numerator(g, 1, ell, delta)
    return num / (1.0 - series.value(ell, delta))


def reconstruct(decomp: ModeDecomposition, t_grid) -> TimeSeries:
    """sum_n r_{+n} e^{i b_n wc t} + r_{-n} e^{-i b_n wc t} on a uniform grid."""
    t = np.asarray(t_grid, dtype=float)
    if t.size > 1 and not np.allclose(np.diff(t), t[1] - t[0], rtol=1e-9, atol=1e-12):
        raise ValueError("reconstruction grid must be uniform")
    wc = decomp.omega_c
    out = np.zeros(t.shape, dtype=complex)
    for md in decomp.modes:
        carrier = np.exp(1j * wc * md.n * t) * np.exp(1j * wc * md.offset * t)
        out += md.r_plus * carrier + md.r_minus * np.conj(carrier)
    dt = float(t[1] - t[0]) if t.size > 1 else 1.0
    return TimeSeries(dt, out, decomp.k, {"source": "bernstein reconstruction", "n_max": decomp.n_max,
                                          "error_band": decomp.truncation_estimate})
