"""Regenerate frozen.json from first principles with mpmath.

Nothing here imports magvlasov.  Run from the repository root:
    python tests/oracles/generate_oracles.py
"""
from __future__ import annotations

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40
OUT = Path(__file__).with_name("frozen.json")


def bessel_scaled():
    rows = []
    for a in ["0.1", "1", "5", "10", "30", "300"]:
        for n in [0, 1, 2, 5, 10, 40]:
            a_mp = mp.mpf(a)
            rows.append({"a": float(a_mp), "n": n, "value": mp.nstr(mp.exp(-a_mp) * mp.besseli(n, a_mp), 25)})
    return rows


def readout(t, k, wc=1):
    """int_0^t of the gyration matrix applied to k, evaluated by quadrature."""
    k1, k2, k3 = (mp.mpf(x) for x in k)
    e1 = mp.quad(lambda u: mp.cos(wc * u) * k1 + mp.sin(wc * u) * k2, [0, t])
    e2 = mp.quad(lambda u: -mp.sin(wc * u) * k1 + mp.cos(wc * u) * k2, [0, t])
    return e1, e2, k3 * t


def kernel(t, k, wc=1):
    """-(q/m) W (k . eta) exp(-|eta|^2/2) with q = m = 1 and W = 1/(4 pi |k|^2)."""
    c = 1 / (4 * mp.pi * sum(x * x for x in k))
    e = readout(t, k, wc)
    dot = sum(ki * ei for ki, ei in zip(k, e))
    return -c * dot * mp.exp(-sum(x * x for x in e) / 2)


def laplace(k, z):
    mp.mp.dps = 20
    upper = 40 if k[2] != 0 else 80
    pts = [mp.mpf(j) for j in range(0, upper + 1, 2)]
    val = mp.quad(lambda t: kernel(t, k) * mp.exp(-z * t), pts)
    mp.mp.dps = 40
    return val


def dispersion_values():
    rows = []
    for k in [(0, 0, 1), (1, 0, 1), (2, 1, 1), (1, 0, 0)]:
        for z in [mp.mpc(0.5, 0.3), mp.mpc(1.0, 2.0), mp.mpc(0.7, -1.0)]:
            val = laplace(k, z)
            rows.append({"k": list(k), "z": [float(z.real), float(z.imag)],
                         "L": [mp.nstr(val.real, 15), mp.nstr(val.imag, 15)]})
    return rows


def log_propagator(k, nu, t, wc=1):
    """-nu int_0^t |eta(s)|^2 ds with eta(s) = int_0^s exp(-u A) k du, all by quadrature."""
    k1, k2, k3 = (mp.mpf(x) for x in k)
    mp.mp.dps = 20

    def eta_sq(s):
        e1 = mp.quad(lambda u: mp.exp(-nu * u) * (mp.cos(wc * u) * k1 + mp.sin(wc * u) * k2), [0, s])
        e2 = mp.quad(lambda u: mp.exp(-nu * u) * (-mp.sin(wc * u) * k1 + mp.cos(wc * u) * k2), [0, s])
        e3 = k3 * mp.quad(lambda u: mp.exp(-nu * u), [0, s])
        return e1 * e1 + e2 * e2 + e3 * e3

    pts = mp.linspace(0, t, int(t) + 2)
    val = -nu * mp.quad(eta_sq, pts)
    mp.mp.dps = 40
    return val


def propagator_values():
    rows = []
    for k, nu, t in [((0, 0, 1), "0.01", 10), ((1, 0, 0), "0.01", 10), ((1, 2, 1), "0.1", 7), ((2, 0, 1), "1e-4", 30)]:
        val = log_propagator(k, mp.mpf(nu), mp.mpf(t))
        rows.append({"k": list(k), "nu": float(mp.mpf(nu)), "t": t, "log_s": mp.nstr(val, 15)})
    return rows


def axis_series(kperp_sq, wc=1):
    """L(iy) = -c sum_m 2 m^2 e^-a I_m(a) / (m^2 - y^2) for k3 = 0, and the derived root equation."""
    a = mp.mpf(kperp_sq) / wc**2
    c = 1 / (4 * mp.pi * kperp_sq)
    m_max = int(2 * a + 60)
    w = [2 * m * m * mp.exp(-a) * mp.besseli(m, a) for m in range(1, m_max + 1)]

    def value(n, delta):
        return -c * mp.fsum(w[m - 1] / (((m - n) - delta) * (m + n + delta)) for m in range(1, m_max + 1))

    return value


def check_series_against_laplace():
    """The axis series continued to real z must equal the Laplace integral of the kernel."""
    for k in [(1, 0, 0), (2, 1, 0)]:
        value = axis_series(k[0] ** 2 + k[1] ** 2)
        z = mp.mpf(1)
        # y = -i z, so m^2 - y^2 = m^2 + z^2; delta chosen so n + delta = -i z
        series = value(0, mp.mpc(0, -1) * z)
        direct = laplace(k, z)
        assert abs(series - direct) < 1e-12 * abs(direct), (k, series, direct)


def bernstein_offsets():
    rows = []
    mp.mp.dps = 60
    for k in [(1, 0, 0), (2, 1, 0), (3, 0, 0)]:
        value = axis_series(k[0] ** 2 + k[1] ** 2)
        for n in range(1, 33):
            f = lambda ld: value(n, mp.exp(ld)) - 1
            lo, hi = mp.mpf(-700), mp.log(mp.mpf(1) - mp.mpf(10) ** -40)
            flo = f(lo)
            for _ in range(400):
                mid = (lo + hi) / 2
                fm = f(mid)
                if (fm > 0) == (flo > 0):
                    lo, flo = mid, fm
                else:
                    hi = mid
                if hi - lo < mp.mpf(10) ** -45:
                    break
            rows.append({"k": list(k), "n": n, "offset": mp.nstr(mp.exp((lo + hi) / 2), 20)})
    mp.mp.dps = 40
    return rows


def main():
    check_series_against_laplace()
    frozen = {
        "bessel_scaled": bessel_scaled(),
        "laplace_kernel": dispersion_values(),
        "log_propagator": propagator_values(),
        "bernstein_offsets": bernstein_offsets(),
    }
    OUT.write_text(json.dumps(frozen, indent=1) + "\n")


if __name__ == "__main__":
    main()
