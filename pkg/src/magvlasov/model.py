"""Physical parameters, wavevector context, equilibria and Gaussian initial data."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class ConfigError(ValueError):
    """Invalid physical or numerical configuration."""


# lag below which expressions carrying 1/nu switch to their Taylor branch
SMALL_NU_T = 1e-8


@dataclass(frozen=True)
class PlasmaParams:
    q: float = 1.0
    m: float = 1.0
    b: float = 1.0
    nu: float = 0.0
    t_par: float = 1.0

    def __post_init__(self):
        for name in ("q", "m", "b", "t_par"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ConfigError(f"{name} must be positive, got {val}")
        if not (np.isfinite(self.nu) and self.nu >= 0):
            raise ConfigError(f"nu must be nonnegative, got {self.nu}")

    @property
    def omega_c(self) -> float:
        return self.q * self.b / self.m

    @property
    def charge_ratio(self) -> float:
        return self.q / self.m

    def with_nu(self, nu: float) -> "PlasmaParams":
        return PlasmaParams(self.q, self.m, self.b, nu, self.t_par)


@dataclass(frozen=True)
class ModeContext:
    """One spatial wavevector together with the coefficients derived from it.

    ``a_eff`` is the argument that actually multiplies (1 - cos) in the
    kernel exponent; ``a_doubled`` = 2|k_perp|^2/omega_c^2 is the same
    quantity in the doubled convention.  The coefficients ``a_k``/``b_k`` carry exp(-a_eff) so that
    they pair with scaled Bessel values.
    """

    k: tuple[int, int, int]
    k_perp_sq: float
    k3: int
    a_doubled: float
    a_eff: float
    w_hat: float
    a_k: float
    b_k: float
    omega_c: float
    charge_ratio: float
    interaction_sign: float = 1.0

    @classmethod
    def from_k(cls, k: Sequence[int], params: PlasmaParams, interaction_sign: float = 1.0) -> "ModeContext":
        kk = tuple(int(x) for x in k)
        if len(kk) != 3 or any(int(x) != x for x in k):
            raise ConfigError("wavevector must have three integer components")
        if kk == (0, 0, 0):
            raise ConfigError("wavevector must be nonzero")
        kp2 = float(kk[0] ** 2 + kk[1] ** 2)
        k2 = kp2 + kk[2] ** 2
        wc = params.omega_c
        a_eff = kp2 / wc**2
        w_hat = interaction_sign * params.q / (4.0 * math.pi * k2)
        qm = params.charge_ratio
        return cls(
            k=kk,
            k_perp_sq=kp2,
            k3=kk[2],
            a_doubled=2.0 * kp2 / wc**2,
            a_eff=a_eff,
            w_hat=w_hat,
            a_k=qm * w_hat * kp2 / wc * math.exp(-a_eff),
            b_k=qm * w_hat * kk[2] ** 2 * math.exp(-a_eff),
            omega_c=wc,
            charge_ratio=qm,
            interaction_sign=interaction_sign,
        )

    @property
    def kvec(self) -> np.ndarray:
        return np.array(self.k, dtype=float)

    @property
    def k_sq(self) -> float:
        return self.k_perp_sq + self.k3**2

    @property
    def coupling(self) -> float:
        """(q/m) * W_hat(k), the prefactor of every kernel."""
        return self.charge_ratio * self.w_hat


@dataclass(frozen=True)
class Equilibrium:
    """Parallel distribution: Maxwellian of temperature t_par plus even Gaussian components.

    Each component is (weight, variance) and contributes
    w exp(-v^2 / (2 s)) / sqrt(2 pi s) in velocity.
    """

    t_par: float = 1.0
    perturbation: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if not self.t_par > 0:
            raise ConfigError("t_par must be positive")
        for w, s in self.perturbation:
            if not s > 0:
                raise ConfigError("perturbation widths must be positive")

    @classmethod
    def maxwellian(cls, t_par: float = 1.0) -> "Equilibrium":
        return cls(t_par, ())

    @property
    def is_maxwellian(self) -> bool:
        return self.t_par == 1.0 and not self.perturbation

    @property
    def mass(self) -> float:
        return 1.0 + sum(w for w, _ in self.perturbation)

    def components(self) -> list[tuple[float, float]]:
        """(weight, variance) pairs including the Maxwellian core."""
        return [(1.0, self.t_par)] + [(float(w), float(s)) for w, s in self.perturbation]

    def f3_hat(self, xi):
        xi = np.asarray(xi, dtype=float)
        return sum(w * np.exp(-0.5 * s * xi * xi) for w, s in self.components())

    def f3(self, v):
        v = np.asarray(v, dtype=float)
        return sum(w * np.exp(-0.5 * v * v / s) / math.sqrt(2 * math.pi * s) for w, s in self.components())

    def f3_prime(self, v):
        v = np.asarray(v, dtype=float)
        return sum(
            -w * v / s * np.exp(-0.5 * v * v / s) / math.sqrt(2 * math.pi * s) for w, s in self.components()
        )

    def f0_hat(self, eta):
        """Transform of the full equilibrium: unit-temperature perpendicular Maxwellian times f3."""
        eta = np.asarray(eta, dtype=float)
        return np.exp(-0.5 * (eta[..., 0] ** 2 + eta[..., 1] ** 2)) * self.f3_hat(eta[..., 2])


def f3_hat(eq: Equilibrium, xi):
    return eq.f3_hat(xi)


@dataclass(frozen=True)
class ModeProfile:
    """Velocity profile of one spatial mode: c * Gaussian(center, widths)."""

    k: tuple[int, int, int]
    amplitude: complex = 1.0
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    widths: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if tuple(self.k) == (0, 0, 0):
            raise ConfigError("wavevector must be nonzero")
        if any(not w > 0 for w in self.widths):
            raise ConfigError("profile widths must be positive")

    def hat(self, eta):
        """exp(-sum sigma_i^2 eta_i^2 / 2 - i eta.v0) times the amplitude."""
        eta = np.asarray(eta, dtype=float)
        sig = np.asarray(self.widths, dtype=float)
        v0 = np.asarray(self.center, dtype=float)
        quad = np.sum((sig * eta) ** 2, axis=-1)
        phase = eta @ v0
        return self.amplitude * np.exp(-0.5 * quad - 1j * phase)

    def density(self, v):
        """Velocity-space profile whose transform is ``hat``."""
        v = np.asarray(v, dtype=float)
        sig = np.asarray(self.widths, dtype=float)
        v0 = np.asarray(self.center, dtype=float)
        z = (v - v0) / sig
        norm = np.prod(sig) * (2 * math.pi) ** 1.5
        return self.amplitude * np.exp(-0.5 * np.sum(z * z, axis=-1)) / norm

    def conjugate_partner(self) -> "ModeProfile":
        """Profile of the -k mode that keeps the physical field real."""
        return ModeProfile(tuple(-x for x in self.k), complex(np.conj(self.amplitude)), self.center, self.widths)


@dataclass(frozen=True)
class InitialData:
    modes: tuple[ModeProfile, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen = set()
        for p in self.modes:
            kk = tuple(p.k)
            if kk in seen:
                raise ConfigError(f"duplicate mode {kk}")
            seen.add(kk)

    @classmethod
    def single(cls, k, amplitude=1.0, center=(0.0, 0.0, 0.0), widths=(1.0, 1.0, 1.0), real_field=False):
        p = ModeProfile(tuple(int(x) for x in k), complex(amplitude), tuple(map(float, center)), tuple(map(float, widths)))
        modes = (p, p.conjugate_partner()) if real_field else (p,)
        return cls(modes)

    def wavevectors(self) -> list[tuple[int, int, int]]:
        return [tuple(p.k) for p in self.modes]

    def profile(self, k: Iterable[int]) -> ModeProfile:
        kk = tuple(int(x) for x in k)
        for p in self.modes:
            if tuple(p.k) == kk:
                return p
        raise KeyError(f"no initial data for mode {kk}")

    def hat(self, k, eta):
        return self.profile(k).hat(eta)

    def is_real_field(self) -> bool:
        """True when every mode's conjugate partner is present with matching data."""
        for p in self.modes:
            try:
                q = self.profile(tuple(-x for x in p.k))
            except KeyError:
                return False
            if q != p.conjugate_partner() and not (
                np.isclose(q.amplitude, np.conj(p.amplitude)) and q.center == p.center and q.widths == p.widths
            ):
                return False
        return True


def third_diagonal(t, nu: float):
    """(1 - exp(-nu t)) / nu with its small-argument branch."""
    t = np.asarray(t, dtype=float)
    if nu == 0.0:
        return t.copy() if t.ndim else float(t)
    x = nu * t
    safe = np.where(x < SMALL_NU_T, 1.0, x)
    out = np.where(x < SMALL_NU_T, t * (1.0 - 0.5 * x), -np.expm1(-safe) / np.where(x < SMALL_NU_T, 1.0, nu))
    return out if out.ndim else float(out)


def trajectory_entries(t, nu: float, omega_c: float):
    """(a11, a12, third) with int_0^t exp(-u A) du = [[a11, a12, 0], [-a12, a11, 0], [0, 0, third]]."""
    t = np.asarray(t, dtype=float)
    decay = np.exp(-nu * t)
    c, s = np.cos(omega_c * t), np.sin(omega_c * t)
    den = nu * nu + omega_c * omega_c
    a11 = (nu * (1.0 - decay * c) + omega_c * decay * s) / den
    a12 = -(omega_c * (1.0 - decay * c) - nu * decay * s) / den
    return a11, a12, third_diagonal(t, nu)


def eta_ct(t, mode: ModeContext, params: PlasmaParams) -> np.ndarray:
    """int_0^t exp(-tau A) k dtau; shape (..., 3) for array t."""
    a11, a12, third = trajectory_entries(t, params.nu, params.omega_c)
    k1, k2, k3 = mode.k
    return np.stack(
        np.broadcast_arrays(a11 * k1 + a12 * k2, -a12 * k1 + a11 * k2, np.asarray(third) * k3), axis=-1
    )
