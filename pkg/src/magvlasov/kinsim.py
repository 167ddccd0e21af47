"""Brute-force per-mode kinetic oracle in Fourier-velocity space.

The transformed distribution is carried on a rectangular eta-grid and
advanced semi-Lagrangianly along the exact characteristics of
d eta/dt = A eta - k.  Collisions act as an exact multiplicative damping
along each characteristic, and the self-consistent field enters as a
source integrated with the trapezoid rule over the step.
"""
from __future__ import annotations

import functools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, ndimage, sparse

from .kernels import log_propagator_s
from .model import ConfigError, Equilibrium, InitialData, ModeContext, ModeProfile, PlasmaParams, eta_ct
from .volterra import TimeSeries

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)

LAYOUT_AXES = {"full": (0, 1, 2), "plane": (0, 1), "line": (2,)}


class InterpolationAccuracyError(ValueError):
    """Time step too large for the source quadrature along characteristics."""


class BoundaryMassWarning(UserWarning):
    """The field is not negligible on the edge of the eta-box."""


@dataclass(frozen=True)
class EtaGrid:
    """Uniform box [-H, H) per axis; the eta3 axis may have its own extent and size."""

    extent: float
    n: int
    layout: str
    extent_par: float | None = None
    n_par: int | None = None

    def __post_init__(self):
        if self.layout not in LAYOUT_AXES:
            raise ConfigError(f"unknown layout {self.layout!r}")
        for size in self.sizes:
            if size % 2:
                raise ConfigError("grid sizes must be even so that eta = 0 is a node")
        if any(not h > 0 for h in self.extents):
            raise ConfigError("grid extent must be positive")

    @property
    def extents(self) -> tuple[float, ...]:
        return tuple((self.extent_par or self.extent) if c == 2 else self.extent for c in LAYOUT_AXES[self.layout])

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple((self.n_par or self.n) if c == 2 else self.n for c in LAYOUT_AXES[self.layout])

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(2.0 * h / n for h, n in zip(self.extents, self.sizes))

    @property
    def spacing(self) -> float:
        """Perpendicular spacing (the only one for the plane layout)."""
        return 2.0 * self.extent / self.n

    def axes(self) -> list[np.ndarray]:
        return [-h + d * np.arange(n) for h, d, n in zip(self.extents, self.spacings, self.sizes)]

    @property
    def ndim(self) -> int:
        return len(LAYOUT_AXES[self.layout])

    @property
    def origin_index(self) -> tuple[int, ...]:
        return tuple(n // 2 for n in self.sizes)

    def points(self) -> np.ndarray:
        """Grid nodes embedded in R^3, shape sizes + (3,)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        pts = np.zeros(mesh[0].shape + (3,))
        for slot, comp in enumerate(LAYOUT_AXES[self.layout]):
            pts[..., comp] = mesh[slot]
        return pts


@dataclass
class EtaField:
    grid: EtaGrid
    values: np.ndarray
    k: ModeContext
    t: float
    profile: ModeProfile | None = None
    history: tuple[complex, ...] = ()  # rho at earlier steps, most recent first

    @property
    def rho(self) -> complex:
        return complex(self.values[self.grid.origin_index])

    def boundary_fraction(self, outflow_face: int = 0, reference: float | None = None) -> float:
        """Largest edge value relative to ``reference`` (default: current peak); ``outflow_face``
        (-1 low, +1 high) names an eta3 face that only receives outgoing mass and is skipped."""
        v = np.abs(self.values)
        peak = v.max() if reference is None else reference
        if peak == 0:
            return 0.0
        par_axis = LAYOUT_AXES[self.grid.layout].index(2) if 2 in LAYOUT_AXES[self.grid.layout] else None
        edge = 0.0
        for ax in range(v.ndim):
            for face, idx in ((-1, 0), (1, -1)):
                if ax == par_axis and face == outflow_face:
                    continue
                edge = max(edge, np.take(v, idx, axis=ax).max())
        return float(edge / peak)


def choose_layout(mode: ModeContext, profile: ModeProfile, eq: Equilibrium) -> str:
    """Smallest exact grid: the eta3 = 0 plane for k3 = 0, the eta3 line for k_perp = 0
    with a centred unit-width perpendicular profile, else the full box."""
    if mode.k3 == 0:
        return "plane"
    if mode.k_perp_sq == 0 and profile.widths[:2] == (1.0, 1.0) and profile.center[:2] == (0.0, 0.0):
        return "line"
    return "full"


def energy_separable(layout: str, profile: ModeProfile, eq: Equilibrium) -> bool:
    """Whether the eliminated directions factor out as the Maxwellian, so energies are exact."""
    if not eq.is_maxwellian:
        return False
    if layout == "plane":
        return profile.widths[2] == 1.0 and profile.center[2] == 0.0
    return True


@dataclass
class StepOperator:
    """Everything that stays fixed from step to step for one mode.

    The foot map is block diagonal (perpendicular rotation-contraction,
    parallel contraction-shift), so tensor-product spline interpolation
    factors into a 2D stage on each eta3 slice and a fixed matrix along eta3.
    """

    layout: str
    perp_weights: sparse.csr_matrix | None
    par_weights: sparse.csr_matrix | None
    damping: np.ndarray
    source_weights: list[list[np.ndarray]]  # [degree - 1][j]: weight of rho at t_{n+1-j}
    order: int
    dt: float
    outflow_face: int = 0

    def transport(self, values: np.ndarray) -> np.ndarray:
        out = values
        if self.perp_weights is not None:
            coef = _prefilter(out, self.order, (0, 1))
            out = (self.perp_weights @ coef.reshape(coef.shape[0] * coef.shape[1], -1)).reshape(out.shape)
        if self.par_weights is not None:
            coef = _prefilter(out, self.order, (out.ndim - 1,))
            flat = coef.reshape(-1, coef.shape[-1])
            out = (self.par_weights @ flat.T).T.reshape(out.shape)
        return out


def dt_max(params: PlasmaParams, mode: ModeContext) -> float:
    return 0.25 / max(params.omega_c, params.nu, math.sqrt(mode.k_sq))


def _exp_minus(params: PlasmaParams, s: float) -> np.ndarray:
    """exp(-s A)."""
    c, sn = math.cos(params.omega_c * s), math.sin(params.omega_c * s)
    return math.exp(-params.nu * s) * np.array([[c, -sn, 0.0], [sn, c, 0.0], [0.0, 0.0, 1.0]])


_PAD = 12


def _spline_weights(coords: np.ndarray, shape: tuple[int, ...], order: int) -> sparse.csr_matrix:
    """Sparse map from B-spline coefficients on the zero-padded grid to values at ``coords``.

    ``coords`` has shape (d, ...) in unpadded index units, d = len(shape) in {1, 2};
    coefficients live on the grid padded by _PAD on each side (see ``_prefilter``).
    """
    basis = interpolate.BSpline.basis_element(np.arange(order + 2) - (order + 1) / 2, extrapolate=False)
    padded = [n + 2 * _PAD for n in shape]
    offs = np.arange(-(order // 2), order + 1 - order // 2)
    base = np.floor if order % 2 else np.rint
    width = len(offs)
    idx, wts = [], []
    for d, m in enumerate(padded):
        x = np.clip(coords[d].ravel() + _PAD, -order, m + order)
        i = base(x).astype(int)[:, None] + offs
        idx.append(i)
        wts.append(np.nan_to_num(basis(x[:, None] - i)))
    npts = idx[0].shape[0]
    if len(shape) == 1:
        cols, w = idx[0], wts[0]
        rows = np.broadcast_to(np.arange(npts)[:, None], cols.shape)
        keep = (cols >= 0) & (cols < padded[0]) & (w != 0)
        return sparse.csr_matrix((w[keep], (rows[keep], cols[keep])), shape=(npts, padded[0]))
    cx = np.repeat(idx[0], width, axis=1).ravel()
    cy = np.tile(idx[1], (1, width)).ravel()
    w = (np.repeat(wts[0], width, axis=1) * np.tile(wts[1], (1, width))).ravel()
    rows = np.repeat(np.arange(npts), width * width)
    keep = (cx >= 0) & (cx < padded[0]) & (cy >= 0) & (cy < padded[1]) & (w != 0)
    return sparse.csr_matrix((w[keep], (rows[keep], (cx * padded[1] + cy)[keep])),
                             shape=(npts, padded[0] * padded[1]))


def _prefilter(values: np.ndarray, order: int, axes: tuple[int, ...]) -> np.ndarray:
    """B-spline coefficients of the zero-extended data along ``axes``."""
    pad = [(_PAD, _PAD) if ax in axes else (0, 0) for ax in range(values.ndim)]

    def one(arr):
        out = np.pad(arr, pad)
        for ax in axes:
            out = ndimage.spline_filter1d(out, order, axis=ax, mode="mirror")
        return out

    return one(values.real) + 1j * one(values.imag)


def build_operator(grid: EtaGrid, mode: ModeContext, params: PlasmaParams, eq: Equilibrium,
                   dt: float, order: int = 5, source: bool = True, time_degree: int = 3) -> StepOperator:
    if dt > dt_max(params, mode):
        raise InterpolationAccuracyError(f"dt = {dt} exceeds dt_max = {dt_max(params, mode):.3g}")
    pts = grid.points()

    def back(sigma):
        # position sigma time units before arrival: exp(-sigma A) eta + eta_CT(sigma)
        return pts @ _exp_minus(params, sigma).T + eta_ct(sigma, mode, params)

    foot = back(dt)
    perp_weights = par_weights = None
    if grid.layout in ("plane", "full"):
        sl = (slice(None), slice(None)) + ((0,) if grid.layout == "full" else ())
        perp_coords = np.stack([(foot[sl + (c,)] + grid.extent) / grid.spacing for c in (0, 1)])
        perp_weights = _spline_weights(perp_coords, (grid.n, grid.n), order)
    if grid.layout in ("line", "full"):
        h_par, d_par, n_par = grid.extents[-1], grid.spacings[-1], grid.sizes[-1]
        foot3 = math.exp(-params.nu * dt) * grid.axes()[-1] + eta_ct(dt, mode, params)[2]
        par_weights = _spline_weights(((foot3 + h_par) / d_par)[None, :], (n_par,), order)
    damping = _partial_damping(back, dt, params.nu)
    # source emitted sigma before arrival, carried to the node: c(eta(sigma)) D(sigma);
    # rho is replaced by its Lagrange interpolant through u = sigma/dt = 0, 1, ..., degree
    coef = -mode.coupling if source else 0.0
    kv = mode.kvec
    zero = np.zeros(pts.shape[:-1])
    weights = [[zero.copy() for _ in range(p + 1)] for p in range(1, time_degree + 1)]
    for x, w in zip(_GL_X, _GL_W):
        s = 0.5 * dt * (x + 1.0)
        e = back(s)
        emitted = 0.5 * dt * w * coef * (e @ kv) * eq.f0_hat(e) * _partial_damping(back, s, params.nu)
        for p in range(1, time_degree + 1):
            for j in range(p + 1):
                weights[p - 1][j] += emitted * _lagrange(s / dt, j, p)
    # transport carries mass toward -k3 along eta3; that face only sees outgoing mass
    outflow = -int(np.sign(mode.k3)) if grid.layout != "plane" else 0
    return StepOperator(grid.layout, perp_weights, par_weights, damping, weights, order, dt, outflow)


def _lagrange(u: float, j: int, p: int) -> float:
    """Lagrange basis polynomial on the nodes 0, 1, ..., p."""
    out = 1.0
    for i in range(p + 1):
        if i != j:
            out *= (u - i) / (j - i)
    return out


def _partial_damping(back, sigma: float, nu: float):
    """exp(-nu int_0^sigma |eta(u)|^2 du) along the backward characteristic."""
    if nu == 0.0 or sigma == 0.0:
        return np.ones(back(0.0).shape[:-1])
    acc = 0.0
    for x, w in zip(_GL_X, _GL_W):
        e = back(0.5 * sigma * (x + 1.0))
        acc = acc + 0.5 * sigma * w * np.sum(e * e, axis=-1)
    return np.exp(-nu * acc)


def step(fld: EtaField, op: StepOperator) -> EtaField:
    """One semi-Lagrangian step.

    The Duhamel source along each characteristic is integrated against a
    Lagrange interpolant of rho through the most recent time levels (lower
    degree while the history is short); the unknown rho_n+1 is fixed by a
    scalar solve at eta = 0.
    """
    origin = fld.grid.origin_index
    hist = (fld.rho,) + fld.history
    p = min(len(hist), len(op.source_weights))
    w = op.source_weights[p - 1]
    base = op.damping * op.transport(fld.values)
    for j in range(1, p + 1):
        base = base + w[j] * hist[j - 1]
    rho_next = base[origin] / (1.0 - w[0][origin])
    new = base + w[0] * rho_next
    keep = len(op.source_weights) - 1
    return EtaField(fld.grid, new, fld.k, fld.t + op.dt, fld.profile, hist[:keep])


def initial_field(grid: EtaGrid, mode: ModeContext, profile: ModeProfile) -> EtaField:
    return EtaField(grid, profile.hat(grid.points()), mode, 0.0, profile)


# --- velocity-space diagnostics --------------------------------------------------------------

@dataclass(frozen=True)
class ModeEnergy:
    entropy: float  # 0.5 * int |h|^2 / mu
    field: float  # 0.5 * (q/m) W_hat |rho|^2
    k_sq: float
    g_term: float
    cutoff_residual: float

    @property
    def e0(self) -> float:
        return self.entropy + self.field

    @property
    def e1(self) -> float:
        return self.k_sq * self.e0


def velocity_transform(fld: EtaField) -> tuple[list[np.ndarray], np.ndarray]:
    """h(v) on the reciprocal grid; returns (per-axis v nodes, values)."""
    g = fld.grid
    sizes, spacings, extents = g.sizes, g.spacings, g.extents
    signs = (-1.0) ** np.indices(sizes).sum(axis=0)
    # the (-1)^j modulation centres the output so index l holds v = (l - n/2) dv
    vals = np.fft.ifftn(fld.values * signs) * np.prod(sizes)
    v_axes = [(np.arange(n) - n // 2) * 2 * math.pi / (n * h) for n, h in zip(sizes, spacings)]
    mesh = np.meshgrid(*v_axes, indexing="ij")
    # e^{-i H v} phase from the grid offset, then the 1/(2 pi)^d normalisation
    phase = np.exp(-1j * sum(hx * m for hx, m in zip(extents, mesh)))
    return v_axes, vals * phase * np.prod(spacings) / (2 * math.pi) ** g.ndim


def mode_energy(fld: EtaField, params: PlasmaParams, v_max: float = 8.0) -> ModeEnergy:
    g = fld.grid
    d = g.ndim
    v_axes, hv = velocity_transform(fld)
    cell = np.prod([v[1] - v[0] for v in v_axes])
    mesh = np.meshgrid(*v_axes, indexing="ij")
    vsq = sum(m * m for m in mesh)
    inside = vsq <= v_max * v_max
    inv_mu = np.where(inside, (2 * math.pi) ** (d / 2) * np.exp(0.5 * np.where(inside, vsq, 0.0)), 0.0)
    entropy = 0.5 * float(np.sum(np.abs(hv) ** 2 * inv_mu)) * cell
    rho = fld.rho
    j = np.zeros(3, dtype=complex)
    for slot, c in enumerate(LAYOUT_AXES[g.layout]):
        j[c] = np.sum(mesh[slot] * hv) * cell
    g_term = float((np.conj(rho) * 1j * (fld.k.kvec @ j)).real)
    resid = _cutoff_residual(fld.profile, LAYOUT_AXES[g.layout], v_max) if fld.profile is not None else 0.0
    return ModeEnergy(float(entropy), 0.5 * fld.k.coupling * abs(rho) ** 2, fld.k.k_sq, g_term, float(resid))


@functools.lru_cache(maxsize=64)
def _cutoff_residual(prof: ModeProfile, comps: tuple[int, ...], v_max: float) -> float:
    """Contribution of |v| > v_max estimated from the closed-form initial profile."""
    d = len(comps)
    v = np.linspace(-2 * v_max, 2 * v_max, 161 if d < 3 else 81)
    dv = v[1] - v[0]
    mesh = np.meshgrid(*([v] * d), indexing="ij")
    pts = np.zeros(mesh[0].shape + (3,))
    for slot, c in enumerate(comps):
        pts[..., c] = mesh[slot]
    sub = ModeProfile(prof.k, prof.amplitude,
                      tuple(prof.center[c] if c in comps else 0.0 for c in range(3)),
                      tuple(prof.widths[c] if c in comps else 1.0 for c in range(3)))
    # the eliminated directions carry a unit Gaussian whose normalisation is dropped
    dens = sub.density(pts) * math.sqrt(2 * math.pi) ** (3 - d)
    vsq = np.sum(pts * pts, axis=-1)
    out = vsq > v_max * v_max
    w = (2 * math.pi) ** (d / 2) * np.exp(0.5 * np.minimum(vsq, 700.0))
    return 0.5 * float(np.sum(np.abs(dens[out]) ** 2 * w[out])) * dv**d


@dataclass(frozen=True)
class Energies:
    e0: float
    e1: float
    g: float
    cutoff_residual: float


def energies(fields: list[EtaField], params: PlasmaParams, eq: Equilibrium | None = None) -> Energies:
    """Sum of per-mode energies; requires the Maxwellian equilibrium."""
    eq = eq or Equilibrium.maxwellian(params.t_par)
    if not eq.is_maxwellian:
        raise ValueError("energy functionals are defined for the Maxwellian equilibrium only")
    parts = [mode_energy(f, params) for f in fields]
    return Energies(sum(p.e0 for p in parts), sum(p.e1 for p in parts), sum(p.g_term for p in parts),
                    sum(p.cutoff_residual for p in parts))


# --- driver ----------------------------------------------------------------------------------

@dataclass
class KinResult:
    mode: ModeContext
    layout: str
    dt: float
    rho: np.ndarray
    energy_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mode_energies: list[ModeEnergy] = field(default_factory=list)
    boundary_fraction: float = 0.0
    final: EtaField | None = None

    def series(self) -> TimeSeries:
        return TimeSeries(self.dt, self.rho, self.mode, {"source": "kinsim", "layout": self.layout})


@dataclass(frozen=True)
class KinConfig:
    extent: float = 12.0
    n: int | None = None
    dt: float | None = None
    order: int = 5
    time_degree: int = 3
    source: bool = True
    layout: str | None = None
    energy_every: int = 0
    boundary_tol: float = 1e-6


def default_size(layout: str) -> int:
    return {"plane": 96, "full": 48, "line": 256}[layout]


def make_grid(cfg: KinConfig, mode: ModeContext, params: PlasmaParams, t_end: float, layout: str) -> EtaGrid:
    """Box from the config; energy runs stretch the eta3 axis to follow the parallel drift,
    since mass leaving through the outflow face would corrupt the velocity-space norms."""
    n = cfg.n or default_size(layout)
    if not cfg.energy_every or layout == "plane" or mode.k3 == 0:
        return EtaGrid(cfg.extent, n, layout)
    horizon = t_end
    if params.nu > 0:
        ts = np.linspace(0.0, t_end, 2001)
        dead = np.nonzero(np.asarray(log_propagator_s(ts, mode, params)) < -37.0)[0]
        if dead.size:
            horizon = float(ts[dead[0]])
    grow = math.exp(params.nu * horizon)
    drift = abs(mode.k3) * (horizon if params.nu == 0 else math.expm1(params.nu * horizon) / params.nu)
    extent_par = cfg.extent * grow + drift
    spacing = 2.0 * cfg.extent / n
    n_par = 2 * math.ceil(extent_par / spacing)
    return EtaGrid(cfg.extent, n, layout, extent_par, n_par)


def simulate(mode: ModeContext, params: PlasmaParams, data: InitialData, t_end: float,
             eq: Equilibrium | None = None, cfg: KinConfig = KinConfig()) -> KinResult:
    eq = eq or Equilibrium.maxwellian(params.t_par)
    profile = data.profile(mode.k)
    layout = cfg.layout or choose_layout(mode, profile, eq)
    if layout == "plane" and mode.k3 != 0:
        raise ConfigError("the plane layout needs k3 = 0")
    if layout == "line" and choose_layout(mode, profile, eq) != "line":
        raise ConfigError("the line layout needs k_perp = 0 and a centred unit-width perpendicular profile")
    grid = make_grid(cfg, mode, params, t_end, layout)
    dt = cfg.dt or min(0.01, 0.1 / params.omega_c)
    op = build_operator(grid, mode, params, eq, dt, cfg.order, cfg.source, cfg.time_degree)
    fld = initial_field(grid, mode, profile)
    n_steps = int(round(t_end / dt))
    rho = np.empty(n_steps + 1, dtype=complex)
    rho[0] = fld.rho
    times, ens = [], []
    if cfg.energy_every:
        if not energy_separable(layout, profile, eq):
            raise ConfigError("energies need a Maxwellian equilibrium and separable eliminated directions")
        times.append(0.0)
        ens.append(mode_energy(fld, params))
    ref_peak = float(np.abs(fld.values).max())
    worst = fld.boundary_fraction(op.outflow_face, ref_peak)
    for j in range(1, n_steps + 1):
        fld = step(fld, op)
        rho[j] = fld.rho
        if cfg.energy_every and j % cfg.energy_every == 0:
            times.append(j * dt)
            ens.append(mode_energy(fld, params))
        if j % 50 == 0 or j == n_steps:
            worst = max(worst, fld.boundary_fraction(op.outflow_face, ref_peak))
    if worst > cfg.boundary_tol:
        warnings.warn(f"field reaches {worst:.2e} of its peak on the box edge", BoundaryMassWarning)
    return KinResult(mode, layout, dt, rho, np.array(times), ens, worst, fld)


def _simulate_args(args):
    return simulate(*args)


def simulate_modes(modes: list[ModeContext], params: PlasmaParams, data: InitialData, t_end: float,
                   eq: Equilibrium | None = None, cfg: KinConfig = KinConfig(), workers: int = 1) -> list[KinResult]:
    """Independent runs per mode, optionally in worker processes."""
    jobs = [(m, params, data, t_end, eq, cfg) for m in modes]
    if workers <= 1 or len(jobs) == 1:
        return [simulate(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_simulate_args, jobs))


def total_energy_series(results: list[KinResult]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(t, E0, E1, G) summed over the represented modes."""
    t = results[0].energy_times
    e0 = np.sum([[e.e0 for e in r.mode_energies] for r in results], axis=0)
    e1 = np.sum([[e.e1 for e in r.mode_energies] for r in results], axis=0)
    g = np.sum([[e.g_term for e in r.mode_energies] for r in results], axis=0)
    return t, e0, e1, g


@dataclass(frozen=True)
class DecayFit:
    rate: float
    window: tuple[float, float]
    samples: int
    warning: str | None


def hypocoercive_decay(t: np.ndarray, total: np.ndarray, nu: float, floor: float = 1e-13) -> DecayFit:
    """Log-linear fit of E0 + E1 over [1/(4 nu), 1/nu]; positive rate means decay.

    Samples below ``floor`` times the initial value are dropped; if the
    window empties that way the last decade above the floor is used.
    """
    t = np.asarray(t, dtype=float)
    total = np.asarray(total, dtype=float)
    if nu > 0:
        lo, hi = 0.25 / nu, 1.0 / nu
    else:
        lo, hi = 0.25 * t[-1], t[-1]
    warn = None
    usable = total > floor * total[0]
    sel = (t >= lo - 1e-9) & (t <= hi + 1e-9) & usable
    if sel.sum() < 3:
        warn = "energy reached the floor before the fit window; fitting the last decade above it"
        last = np.nonzero(usable)[0]
        end = last[-1]
        start = np.nonzero(total[: end + 1] <= 10.0 * total[end])[0][0]
        sel = np.zeros_like(usable)
        sel[max(0, min(start, end - 2)) : end + 1] = True
        lo, hi = float(t[sel][0]), float(t[sel][-1])
    if t[-1] < hi - 1e-9:
        warn = (warn or "") + " run ends before the fit window closes"
    slope = np.polyfit(t[sel], np.log(total[sel]), 1)[0]
    return DecayFit(float(-slope), (lo, hi), int(sel.sum()), warn)
