"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_backends.py``; prints one line per case.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from magvlasov import _backend
from magvlasov.kernels import kernel_collisionless
from magvlasov.model import ModeContext, PlasmaParams


def volterra_case(n_steps: int, dt: float = 0.01):
    params = PlasmaParams()
    mode = ModeContext.from_k((1, 0, 1), params)
    t = dt * np.arange(n_steps)
    kernel = np.ascontiguousarray(kernel_collisionless(t, mode, params), dtype=float)
    forcing = np.exp(-0.5 * t**2).astype(np.complex128)
    return forcing, kernel, dt


def time_call(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, nargs="+", default=[1000, 4000])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args(argv)
    if _backend.NAME != "compiled":
        print("compiled extension unavailable; only the fallback can be timed")
    backends = ["python"] + (["compiled"] if _backend.NAME == "compiled" else [])
    print(f"{'case':<28}{'backend':<10}{'seconds':>12}{'speedup':>10}")
    for n in args.steps:
        forcing, kernel, dt = volterra_case(n)
        times = {b: time_call(lambda b=b: _backend.volterra_march(forcing, kernel, dt, 1e6, backend=b), args.repeat)
                 for b in backends}
        ref = _backend.volterra_march(forcing, kernel, dt, 1e6, backend="python")[0]
        for b in backends:
            out = _backend.volterra_march(forcing, kernel, dt, 1e6, backend=b)[0]
            assert np.allclose(out, ref, rtol=1e-12, atol=1e-14), b
            print(f"{'volterra_march n=' + str(n):<28}{b:<10}{times[b]:>12.5f}{times['python'] / times[b]:>10.1f}")
    for a in (1.0, 30.0, 300.0):
        times = {b: time_call(lambda b=b: [_backend.bessel_table(a, 64, 1e-15, backend=b) for _ in range(200)],
                              args.repeat) for b in backends}
        for b in backends:
            print(f"{'bessel_table a=%g x200' % a:<28}{b:<10}{times[b]:>12.5f}{times['python'] / times[b]:>10.1f}")


if __name__ == "__main__":
    main()
