"""Chooses the compiled kernels when the extension is importable.

Set ``MAGVLASOV_BACKEND=python`` to force the numpy fallback.
"""
from __future__ import annotations

import os

import numpy as np

from . import _fallback

NAME = "python"
_impl = _fallback
if os.environ.get("MAGVLASOV_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        NAME = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback


def volterra_march(forcing, kernel, dt, limit, backend: str | None = None):
    impl = _pick(backend)
    forcing = np.ascontiguousarray(forcing, dtype=np.complex128)
    if np.iscomplexobj(kernel):
        return _fallback.volterra_march(forcing, np.asarray(kernel), dt, limit)
    kernel = np.ascontiguousarray(kernel, dtype=np.float64)
    return impl.volterra_march(forcing, kernel, float(dt), float(limit))


def bessel_table(a, n_max, tol, backend: str | None = None):
    return np.asarray(_pick(backend).bessel_table(a, n_max, tol))


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _fallback
    if backend == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {backend!r}")
