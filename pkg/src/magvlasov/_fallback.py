"""Pure numpy versions of the compiled kernels in ``_core``."""
from __future__ import annotations

import numpy as np

from .specfun import _table_numpy


def volterra_march(forcing: np.ndarray, kernel: np.ndarray, dt: float, limit: float):
    n = forcing.shape[0]
    rho = np.zeros(n, dtype=np.complex128)
    if n == 0:
        return rho, -1
    kernel = np.asarray(kernel)
    denom = 1.0 - 0.5 * dt * kernel[0]
    rho[0] = forcing[0]
    for j in range(1, n):
        s = 0.5 * kernel[j] * rho[0]
        if j > 1:
            s = s + np.dot(kernel[j - 1 : 0 : -1], rho[1:j])
        rho[j] = (forcing[j] + dt * s) / denom
        if not abs(rho[j]) <= limit:
            return rho[: j + 1], j
    return rho, -1


def bessel_table(a: float, n_max: int, tol: float) -> np.ndarray:
    return _table_numpy(a, n_max, tol)
