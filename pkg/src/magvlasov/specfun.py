"""Exponentially scaled modified Bessel functions of integer order.

Every routine here returns ``exp(-a) * I_n(a)``.  The ascending series is
summed with each term formed in the log domain, so nothing overflows for
arguments up to ~1e4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln


class OverflowRisk(ArithmeticError):
    """Raised when a series term is not representable even in log form."""


class ToleranceNotAchievable(ValueError):
    """Raised when a truncated identity cannot be certified to the requested tolerance."""


@dataclass(frozen=True)
class BesselEval:
    n: int
    a: float
    value_scaled: float
    truncation_bound: float


def _log_term(n: int, a: float, m: int) -> float:
    return -a + (2 * m + n) * math.log(0.5 * a) - math.lgamma(m + 1) - math.lgamma(m + n + 1)


def bessel_i_scaled(n: int, a: float, tol: float = 1e-15) -> BesselEval:
    """exp(-a) I_n(a) by direct summation with a certified geometric tail.

    Summation stops once the summation index is past the peak of the terms
    and the tail bound is below ``tol`` relative to the partial sum.
    """
    if n < 0 or int(n) != n:
        raise ValueError("order must be a nonnegative integer")
    if a < 0 or not np.isfinite(a):
        raise ValueError("argument must be finite and nonnegative")
    if tol <= 0:
        raise ValueError("tol must be positive")
    n = int(n)
    a = float(a)
    if a == 0.0:
        return BesselEval(n, a, 1.0 if n == 0 else 0.0, 0.0)
    if a > 1e4:
        raise OverflowRisk(f"argument {a} outside the certified range")
    half_sq = 0.25 * a * a
    total = 0.0
    m = 0
    while True:
        lt = _log_term(n, a, m)
        if not np.isfinite(lt):
            raise OverflowRisk(f"log-term not finite at n={n}, a={a}, m={m}")
        term = math.exp(lt)
        total += term
        # ratio of the next two terms; decreasing in m
        r_next = half_sq / ((m + 2) * (m + n + 2))
        if r_next < 1.0:
            nxt = term * half_sq / ((m + 1) * (m + n + 1))
            tail = nxt / (1.0 - r_next)
            if tail <= tol * total or (total == 0.0 and tail == 0.0):
                return BesselEval(n, a, total, tail)
        m += 1


def _table_numpy(a: float, n_max: int, tol: float) -> np.ndarray:
    if a == 0.0:
        out = np.zeros(n_max + 1)
        out[0] = 1.0
        return out
    # enough terms for the n = 0 series, which converges slowest
    m_hi = int(0.5 * a + 10.0 * math.sqrt(a + 1.0) + 40.0)
    m = np.arange(m_hi + 1)[None, :]
    n = np.arange(n_max + 1)[:, None]
    logt = -a + (2 * m + n) * math.log(0.5 * a) - gammaln(m + 1) - gammaln(m + n + 1)
    return np.exp(logt).sum(axis=1)


def bessel_i_scaled_table(a: float, n_max: int, tol: float = 1e-15) -> np.ndarray:
    """Array of exp(-a) I_n(a) for n = 0..n_max."""
    if a < 0:
        raise ValueError("argument must be nonnegative")
    if a > 1e4:
        raise OverflowRisk(f"argument {a} outside the certified range")
    from . import _backend

    return _backend.bessel_table(float(a), int(n_max), float(tol))


def scaled_upper_bound(n: int | np.ndarray, a: float) -> np.ndarray:
    """Rigorous bound exp(-a) (a/2)^n / n! * exp(a^2 / (4(n+1))) >= exp(-a) I_n(a)."""
    n = np.asarray(n, dtype=float)
    if a == 0.0:
        return np.where(n == 0, 1.0, 0.0)
    logb = -a + n * math.log(0.5 * a) - gammaln(n + 1) + a * a / (4.0 * (n + 1))
    return np.exp(np.minimum(logb, 0.0))


def scaled_tail_bound(n_start: int, a: float) -> float:
    """Certified bound on sum_{n >= n_start} exp(-a) I_n(a).

    Successive bounds shrink at least by a/(2(n+1)), so once that ratio
    is below one the tail is dominated by a geometric series.
    """
    if a == 0.0:
        return 1.0 if n_start <= 0 else 0.0
    ratio = 0.5 * a / (n_start + 1.0)
    if ratio >= 1.0:
        return math.inf
    return float(scaled_upper_bound(n_start, a)) / (1.0 - ratio)


def harmonic_cutoff(a: float, tol: float, weight_power: int = 0, floor: int = 20) -> int:
    """Smallest n >= max(2a, floor) whose weighted scaled tail sum drops below tol.

    ``weight_power`` accounts for polynomial weights n^p multiplying the terms.
    """
    n = max(int(math.ceil(2.0 * a)), floor)
    while True:
        tail = scaled_tail_bound(n, a) * max(n, 1) ** weight_power * 4.0
        if tail < tol:
            return n
        n += 1
        if n > 100000:
            raise ToleranceNotAchievable("harmonic cutoff did not converge")


@dataclass(frozen=True)
class IdentityReport:
    a: float
    n_max: int
    recurrence: float
    generating: float
    first_moment: float
    tail_bound: float

    def max_residual(self) -> float:
        return max(self.recurrence, self.generating, self.first_moment)


def check_identities(a: float, n_max: int, tol: float = 1e-10) -> IdentityReport:
    """Residuals of the three-term recurrence, the generating sum and the first-moment sum."""
    if a <= 0:
        raise ValueError("a must be positive")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    vals = np.array([bessel_i_scaled(n, a, 1e-17).value_scaled for n in range(n_max + 2)])
    n = np.arange(1, n_max + 1)
    rec = np.abs(vals[n - 1] - vals[n + 1] - (2.0 * n / a) * vals[n])
    tail = scaled_tail_bound(n_max + 1, a)
    if not tail < tol:
        raise ToleranceNotAchievable(
            f"n_max={n_max} too small for a={a}: tail bound {tail:.3e} exceeds {tol:.1e}"
        )
    s = vals[1 : n_max + 1]
    gen = abs(1.0 - (vals[0] + 2.0 * math.fsum(s)))
    mom = abs(vals[0] + vals[1] - math.fsum((2.0 * n / a) * s))
    return IdentityReport(float(a), int(n_max), float(rec.max()), float(gen), float(mom), float(tail))
