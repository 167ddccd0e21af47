"""Trapezoid product integration for rho(t) = f(t) + int_0^t K(t - s) rho(s) ds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _backend
from .kernels import forcing_collisional, forcing_collisionless, kernel_collisional, kernel_collisionless
from .model import Equilibrium, InitialData, ModeContext, PlasmaParams


class VolterraBlowUp(RuntimeError):
    """The march exceeded the growth guard; signals a sign error or a genuine instability."""

    def __init__(self, index: int, time: float, magnitude: float, limit: float):
        self.index, self.time, self.magnitude, self.limit = index, time, magnitude, limit
        super().__init__(f"|rho| = {magnitude:.3e} exceeded guard {limit:.3e} at t = {time:.6g} (step {index})")


@dataclass
class TimeSeries:
    dt: float
    values: np.ndarray
    k: ModeContext | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("time series contains non-finite samples")

    @property
    def t(self) -> np.ndarray:
        return self.dt * np.arange(len(self.values))

    def __len__(self) -> int:
        return len(self.values)

    def table(self) -> np.ndarray:
        v = self.values
        return np.column_stack([self.t, v.real, v.imag, np.abs(v)])


def _sample(obj, t):
    if callable(obj):
        return np.asarray(obj(t))
    arr = np.asarray(obj)
    if arr.shape != t.shape:
        raise ValueError("sampled input does not match the time grid")
    return arr


def solve(
    forcing: Callable | np.ndarray,
    kernel: Callable | np.ndarray,
    dt: float,
    t_end: float,
    k: ModeContext | None = None,
    guard: float = 1e6,
    backend: str | None = None,
    meta: dict | None = None,
) -> TimeSeries:
    """Second-order trapezoid march; explicit whenever K(0) = 0."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = int(round(t_end / dt)) + 1
    t = dt * np.arange(n)
    f = _sample(forcing, t).astype(np.complex128)
    kv = _sample(kernel, t)
    if not np.isfinite(kv[0]):
        raise ValueError("kernel must be finite at t = 0")
    limit = guard * max(float(np.max(np.abs(f))), np.finfo(float).tiny)
    rho, fail = _backend.volterra_march(f, kv, dt, limit, backend)
    if fail >= 0:
        raise VolterraBlowUp(fail, fail * dt, float(abs(rho[fail])), limit)
    info = {"solver": "trapezoid product integration", "order": 2, "dt": dt, "t_end": t_end,
            "backend": backend or _backend.NAME}
    info.update(meta or {})
    return TimeSeries(dt, rho, k, info)


def mode_problem(mode: ModeContext, params: PlasmaParams, data: InitialData, eq: Equilibrium | None = None):
    """(forcing, kernel, kind) for one mode; collisional objects whenever nu > 0."""
    if params.nu > 0:
        forcing = lambda t: forcing_collisional(t, mode, params, data)
        kernel = lambda t: kernel_collisional(t, mode, params, eq)
        kind = "collisional"
    else:
        forcing = lambda t: forcing_collisionless(t, mode, params, data)
        kernel = lambda t: kernel_collisionless(t, mode, params, eq)
        kind = "collisionless"
    return forcing, kernel, kind


def solve_mode(
    mode: ModeContext,
    params: PlasmaParams,
    data: InitialData,
    dt: float,
    t_end: float,
    eq: Equilibrium | None = None,
    guard: float = 1e6,
    backend: str | None = None,
) -> TimeSeries:
    forcing, kernel, kind = mode_problem(mode, params, data, eq)
    return solve(forcing, kernel, dt, t_end, k=mode, guard=guard, backend=backend,
                 meta={"kernel": kind, "k": list(mode.k)})


def convergence_order(forcing, kernel, dt: float, t_end: float, backend: str | None = None) -> float:
    """Observed order from runs at dt, dt/2, dt/4 compared on the coarse grid."""
    runs = [solve(forcing, kernel, dt / 2**j, t_end, backend=backend).values for j in range(3)]
    coarse = [r[:: 2**j] for j, r in enumerate(runs)]
    e1 = np.max(np.abs(coarse[0] - coarse[1]))
    e2 = np.max(np.abs(coarse[1] - coarse[2]))
    return math.log2(e1 / e2)
