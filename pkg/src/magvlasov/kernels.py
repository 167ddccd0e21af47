"""Time-domain kernels and forcing densities of the per-mode Volterra equation."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .model import (
    SMALL_NU_T,
    Equilibrium,
    InitialData,
    ModeContext,
    PlasmaParams,
    eta_ct,
    third_diagonal,
    trajectory_entries,
)

UNDERFLOW = 1e-300


class AliasingError(RuntimeError):
    """Angular sampling too coarse for the requested harmonic range."""


@dataclass(frozen=True)
class TrajectoryMatrices:
    t: float
    a11: float
    a12: float
    third_diag: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.a11, self.a12, 0.0], [-self.a12, self.a11, 0.0], [0.0, 0.0, self.third_diag]])


def trajectory_matrices(t: float, params: PlasmaParams) -> TrajectoryMatrices:
    """Entries of int_0^t exp(-u A) du, which equals exp(sA) int_s^{s+t} exp(-rA) dr."""
    a11, a12, third = trajectory_entries(float(t), params.nu, params.omega_c)
    return TrajectoryMatrices(float(t), float(a11), float(a12), float(third))


def transport_matrix(params: PlasmaParams) -> np.ndarray:
    wc, nu = params.omega_c, params.nu
    return np.array([[nu, wc, 0.0], [-wc, nu, 0.0], [0.0, 0.0, nu]])


def rotation(t: float, omega_c: float) -> np.ndarray:
    """Orthogonal gyration matrix O(t)."""
    c, s = math.cos(omega_c * t), math.sin(omega_c * t)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_integral(t: float, omega_c: float) -> np.ndarray:
    """The companion matrix O-tilde(t) whose product O(t) O-tilde(t)^T maps k to the readout point."""
    c, s = math.cos(omega_c * t), math.sin(omega_c * t)
    return np.array(
        [[s / omega_c, -(1 - c) / omega_c, 0.0], [(1 - c) / omega_c, s / omega_c, 0.0], [0.0, 0.0, t]]
    )


def readout_point(t, mode: ModeContext, omega_c: float) -> np.ndarray:
    """O(t) O-tilde(t)^T k for array t, shape (..., 3)."""
    t = np.asarray(t, dtype=float)
    c, s = np.cos(omega_c * t), np.sin(omega_c * t)
    k1, k2, k3 = mode.k
    e1 = (k1 * s - k2 * (1 - c)) / omega_c
    e2 = (k1 * (1 - c) + k2 * s) / omega_c
    return np.stack(np.broadcast_arrays(e1, e2, k3 * t), axis=-1)


def _eq(params: PlasmaParams, eq: Equilibrium | None) -> Equilibrium:
    return eq if eq is not None else Equilibrium.maxwellian(params.t_par)


def kernel_collisionless(t, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None):
    """Closed form of K(t,k) for nu = 0."""
    eq = _eq(params, eq)
    t = np.asarray(t, dtype=float)
    wc = params.omega_c
    bracket = mode.k_perp_sq / wc * np.sin(wc * t) + mode.k3**2 * t
    envelope = np.exp(-mode.a_eff * (1.0 - np.cos(wc * t))) * eq.f3_hat(mode.k3 * t)
    out = -mode.coupling * bracket * envelope
    return out if out.ndim else float(out)


def kernel_oracle(t, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None):
    """K(t,k) assembled from the gradient transform at O(t) O-tilde(t)^T k.

    Uses (grad f)^(eta) = i eta f^(eta) and the unit-temperature
    perpendicular Maxwellian; the transport equation fixes the prefactor
    as +i (q/m) W_hat.
    """
    eq = _eq(params, eq)
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    k = mode.kvec
    out = np.empty(ts.shape)
    for idx, tt in enumerate(ts):
        eta = rotation(tt, params.omega_c) @ rotation_integral(tt, params.omega_c).T @ k
        grad_hat = 1j * eta * eq.f0_hat(eta)
        out[idx] = (1j * mode.coupling * (k @ grad_hat)).real
    return float(out[0]) if scalar else out


def _phi(x):
    """x - 2(1 - e^-x) + (1 - e^-2x)/2, with a series for small x."""
    x = np.asarray(x, dtype=float)
    small = x < 0.05
    xs = np.where(small, x, 0.0)
    series = np.zeros_like(xs)
    fact = 1.0
    for n in range(1, 16):
        fact *= n
        if n >= 3:
            series = series + (-1) ** n * (2.0 - 2.0 ** (n - 1)) / fact * xs**n
    xl = np.where(small, 1.0, x)
    direct = xl + 2.0 * np.expm1(-xl) - 0.5 * np.expm1(-2.0 * xl)
    return np.where(small, series, direct)


def log_propagator_s(t, mode: ModeContext, params: PlasmaParams):
    """log S(t,k) = -nu int_0^t |eta_CT(s)|^2 ds in closed form."""
    nu, wc = params.nu, params.omega_c
    t = np.asarray(t, dtype=float)
    if nu == 0.0:
        out = np.zeros_like(t)
        return out if out.ndim else 0.0
    x = nu * t
    par = mode.k3**2 * _phi(x) / nu**2
    a11, _, _ = trajectory_entries(t, nu, wc)
    half = np.asarray(third_diagonal(t, 2.0 * nu))  # (1 - e^{-2 nu t}) / (2 nu)
    q = t + half - 2.0 * a11
    perp = nu * mode.k_perp_sq * q / (nu * nu + wc * wc)
    out = -(par + perp)
    return out if out.ndim else float(out)


def propagator_s(t, mode: ModeContext, params: PlasmaParams, return_flag: bool = False):
    """S(t,k) in (0, 1]; values below 1e-300 clamp to zero and raise the flag."""
    logs = np.asarray(log_propagator_s(t, mode, params))
    vals = np.exp(logs)
    flag = bool(np.any(vals < UNDERFLOW))
    vals = np.where(vals < UNDERFLOW, 0.0, vals)
    vals = vals if vals.ndim else float(vals)
    return (vals, flag) if return_flag else vals


def propagator_s_integral(t: float, mode: ModeContext, params: PlasmaParams, tol: float = 1e-13) -> float:
    """S(t,k) from adaptive quadrature of |eta_CT|^2, split into half-gyration panels."""
    nu, wc = params.nu, params.omega_c
    if t == 0.0:
        return 1.0

    def integrand(s):
        e = eta_ct(s, mode, params)
        return float(e @ e)

    edges = np.arange(0.0, t, math.pi / wc)
    edges = np.append(edges, t)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=tol, limit=200)
        total += val
    return math.exp(-nu * total)


def kernel_collisional(t, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None):
    """K^nu(t,k) = -(q/m) W_hat S(t) (k . eta_CT) f0_hat(eta_CT)."""
    eq = _eq(params, eq)
    nu, wc = params.nu, params.omega_c
    t = np.asarray(t, dtype=float)
    a11, _, third = trajectory_entries(t, nu, wc)
    decay = np.exp(-nu * t)
    perp_sq = mode.k_perp_sq * (1.0 - 2.0 * np.cos(wc * t) * decay + decay * decay) / (nu * nu + wc * wc)
    bracket = a11 * mode.k_perp_sq + mode.k3**2 * np.asarray(third)
    logs = np.asarray(log_propagator_s(t, mode, params))
    envelope = np.exp(logs - 0.5 * perp_sq) * eq.f3_hat(mode.k3 * np.asarray(third))
    envelope = np.where(envelope < UNDERFLOW, 0.0, envelope)
    out = -mode.coupling * bracket * envelope
    return out if out.ndim else float(out)


def forcing_collisionless(t, mode: ModeContext, params: PlasmaParams, data: InitialData):
    """rho_0(t,k) = h_in(k, O(t) O-tilde(t)^T k)."""
    prof = data.profile(mode.k)
    out = prof.hat(readout_point(t, mode, params.omega_c))
    return out if np.ndim(out) else complex(out)


def forcing_collisional(t, mode: ModeContext, params: PlasmaParams, data: InitialData):
    """rho_{0;nu}(t,k) = S(t,k) h_in(k, eta_CT(t,k))."""
    prof = data.profile(mode.k)
    logs = np.asarray(log_propagator_s(t, mode, params))
    out = np.exp(logs) * prof.hat(eta_ct(t, mode, params))
    return out if np.ndim(out) else complex(out)


@dataclass(frozen=True)
class GCoefficients:
    """Angular Fourier coefficients of the periodic passive density, rho_0(t) = sum g_n e^{i n wc t}."""

    n: np.ndarray
    values: np.ndarray
    omega_c: float
    n_samples: int
    truncation: float

    def __getitem__(self, n: int) -> complex:
        idx = n + (len(self.n) - 1) // 2
        if idx < 0 or idx >= len(self.n):
            return 0.0j
        return complex(self.values[idx])

    @property
    def n_max(self) -> int:
        return (len(self.n) - 1) // 2

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.exp(1j * self.omega_c * np.multiply.outer(t, self.n)) @ self.values


def g_coefficients(
    mode: ModeContext,
    params: PlasmaParams,
    data: InitialData,
    n_max: int,
    n_samples: int | None = None,
    tol: float = 1e-13,
) -> GCoefficients:
    """Discrete angular Fourier coefficients of h_in on the gyration circle."""
    if mode.k3 != 0:
        raise ValueError("g-coefficients require k3 = 0")
    wc = params.omega_c
    n_samples = int(n_samples or max(4 * n_max, 64))
    if n_samples < 4 * n_max:
        raise ValueError("need at least 4*n_max angular samples")
    t = 2 * math.pi * np.arange(n_samples) / (n_samples * wc)
    rho0 = np.asarray(forcing_collisionless(t, mode, params, data))
    coeffs = np.fft.fft(rho0) / n_samples
    freqs = np.fft.fftfreq(n_samples, 1.0 / n_samples).astype(int)
    peak = np.max(np.abs(coeffs))
    top = np.abs(coeffs[np.abs(freqs) >= 3 * n_samples // 8])
    if peak > 0 and top.size and top.max() > tol * peak:
        raise AliasingError(
            f"trailing angular coefficients {top.max() / peak:.2e} exceed {tol:.1e}; increase n_samples"
        )
    n = np.arange(-n_max, n_max + 1)
    vals = coeffs[n % n_samples]
    outside = np.abs(freqs) > n_max
    truncation = float(np.sqrt(np.sum(np.abs(coeffs[outside]) ** 2)))
    return GCoefficients(n, vals, wc, n_samples, truncation)


def kernel_table(t, mode: ModeContext, params: PlasmaParams, eq: Equilibrium | None = None, data: InitialData | None = None):
    """Columns for the kernel dump: t, K, K_nu, S, rho0_re, rho0_im."""
    t = np.asarray(t, dtype=float)
    k0 = kernel_collisionless(t, mode, params, eq)
    if params.nu > 0:
        knu = kernel_collisional(t, mode, params, eq)
        s = propagator_s(t, mode, params)
    else:
        knu = k0
        s = np.ones_like(t)
    if data is not None:
        rho = forcing_collisional(t, mode, params, data) if params.nu > 0 else forcing_collisionless(t, mode, params, data)
    else:
        rho = np.zeros_like(t, dtype=complex)
    return np.column_stack([t, k0, knu, s, np.real(rho), np.imag(rho)])
