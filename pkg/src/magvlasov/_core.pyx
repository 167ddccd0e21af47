# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: the Volterra trapezoid march and the scaled Bessel table."""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, lgamma, sqrt, hypot

cnp.import_array()


def volterra_march(const double complex[::1] forcing, const double[::1] kernel,
                   double dt, double limit):
    """Trapezoid product integration with a real kernel sampled on the same grid.

    Returns (rho, j_fail); j_fail is -1 on success, otherwise the first index
    whose magnitude exceeded ``limit``.
    """
    cdef Py_ssize_t n = forcing.shape[0]
    cdef Py_ssize_t i, j
    cdef double[::1] rr = np.zeros(n)
    cdef double[::1] ri = np.zeros(n)
    cdef double sr, si, kv, denom
    out = np.zeros(n, dtype=np.complex128)
    cdef double complex[::1] rho = out
    if n == 0:
        return out, -1
    denom = 1.0 - 0.5 * dt * kernel[0]
    # the integral vanishes at t = 0
    rr[0] = forcing[0].real
    ri[0] = forcing[0].imag
    rho[0] = rr[0] + 1j * ri[0]
    for j in range(1, n):
        sr = 0.5 * kernel[j] * rr[0]
        si = 0.5 * kernel[j] * ri[0]
        for i in range(1, j):
            kv = kernel[j - i]
            sr += kv * rr[i]
            si += kv * ri[i]
        rr[j] = (forcing[j].real + dt * sr) / denom
        ri[j] = (forcing[j].imag + dt * si) / denom
        rho[j] = rr[j] + 1j * ri[j]
        if not hypot(rr[j], ri[j]) <= limit:
            return out[: j + 1], j
    return out, -1


def bessel_table(double a, int n_max, double tol):
    """exp(-a) I_n(a), n = 0..n_max, each by the ascending series with a geometric tail stop."""
    out = np.zeros(n_max + 1)
    cdef double[::1] v = out
    cdef int n, m
    cdef double la, hsq, term, total, r_next, nxt
    if a == 0.0:
        v[0] = 1.0
        return out
    la = log(0.5 * a)
    hsq = 0.25 * a * a
    for n in range(n_max + 1):
        total = 0.0
        m = 0
        while True:
            term = exp(-a + (2 * m + n) * la - lgamma(m + 1.0) - lgamma(m + n + 1.0))
            total += term
            r_next = hsq / ((m + 2.0) * (m + n + 2.0))
            if r_next < 1.0:
                nxt = term * hsq / ((m + 1.0) * (m + n + 1.0))
                if nxt / (1.0 - r_next) <= tol * total or total == 0.0:
                    break
            m += 1
        v[n] = total
    return out
