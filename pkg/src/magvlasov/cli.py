"""Command-line experiments writing CSV/JSON artifacts with a manifest."""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import platform
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import _backend
from .model import ConfigError, Equilibrium, InitialData, ModeContext, ModeProfile, PlasmaParams

OUT_ENV = "MAGVLASOV_OUT"
EXPERIMENTS = ("bessel-check", "dispersion-scan", "bernstein", "volterra-run", "oracle-run",
               "cross-validate", "penrose-scan", "enhanced-scaling", "energy-decay")

DEFAULT_NUMERICS = {
    "bessel-check": {"a_values": [0.1, 1.0, 5.0, 10.0, 30.0], "n_max": 40, "tol": 1e-10},
    "dispersion-scan": {"lambda_max": 2.0, "omega_max": 20.0, "grid": [9, 161], "winding_omega_max": 40.0,
                        "winding_samples": 2001, "scan_points": 401, "axis_offset": 0.05},
    "bernstein": {"n_max": 32, "tol": 1e-12},
    "volterra-run": {"dt": 0.01, "t_end": 50.0, "guard": 1e6},
    "oracle-run": {"dt": 0.05, "t_end": 20.0, "extent": 9.0, "n": None, "energy_every": 0},
    "cross-validate": {"dt": 0.05, "t_end": 20.0, "volterra_dt": 0.001, "extent": 9.0, "n": 144,
                       "n_max": 32, "tol": 1e-3},
    "penrose-scan": {"k_max": 4.0, "lambda_max": 2.0, "omega_max": 20.0, "grid": [9, 161],
                     "winding_omega_max": 40.0, "winding_samples": 2001},
    "enhanced-scaling": {"nus": [1e-2, 1e-3, 1e-4, 1e-5, 1e-6], "source": "propagator", "threshold": 1.0},
    "energy-decay": {"nus": [0.0, 1e-2], "dt": 0.05, "t_end": 100.0, "extent": 9.0, "n": 144,
                     "energy_every": 20},
}
DEFAULT_MODES = {
    "bessel-check": [],
    "dispersion-scan": [[0, 0, 1]],
    "bernstein": [[1, 0, 0]],
    "volterra-run": [[1, 0, 0]],
    "oracle-run": [[1, 0, 0]],
    "cross-validate": [[1, 0, 0]],
    "penrose-scan": None,
    "enhanced-scaling": [[0, 0, 1], [1, 0, 0]],
    "energy-decay": [[1, 0, 0]],
}
# energy diagnostics are sharpest for data centred in velocity
DEFAULT_CENTER = {"energy-decay": (0.0, 0.0, 0.0)}
TOLERANCE_KEYS = ("tol",)


@dataclass
class ExperimentSetup:
    name: str
    params: PlasmaParams
    modes: list[tuple[int, int, int]]
    data: dict
    numerics: dict
    equilibrium: Equilibrium
    output_dir: Path
    interaction_sign: float = 1.0
    raw: dict = field(default_factory=dict)

    def initial_data(self) -> InitialData:
        d = self.data
        profiles = []
        for k in self.modes:
            if any(tuple(p.k) == k for p in profiles):
                continue
            p = ModeProfile(k, complex(d["amplitude"]), tuple(d["center"]), tuple(d["widths"]))
            profiles.append(p)
            if d["real_field"] and tuple(-x for x in k) not in self.modes:
                profiles.append(p.conjugate_partner())
        return InitialData(tuple(profiles))

    def mode(self, k, params: PlasmaParams | None = None) -> ModeContext:
        return ModeContext.from_k(k, params or self.params, self.interaction_sign)


# --- configuration ----------------------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        import yaml

        cfg = yaml.safe_load(text)
    else:
        cfg = json.loads(text)
    if not isinstance(cfg, dict):
        raise ConfigError("config: top level must be a mapping")
    return cfg


def _number(section: str, key: str, val, positive=True, allow_zero=False):
    if not isinstance(val, (int, float)) or isinstance(val, bool) or not math.isfinite(val):
        raise ConfigError(f"{section}.{key}: expected a finite number, got {val!r}")
    if positive and (val < 0 or (val == 0 and not allow_zero)):
        raise ConfigError(f"{section}.{key}: must be {'nonnegative' if allow_zero else 'positive'}, got {val}")
    return float(val)


def build_setup(name: str, cfg: dict, out: str | None, tol_scale: float) -> ExperimentSetup:
    if name not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown name {name!r}")
    known = {"params", "modes", "data", "numerics", "equilibrium", "interaction_sign"}
    extra = set(cfg) - known
    if extra:
        raise ConfigError(f"config: unknown sections {sorted(extra)}")
    p = dict(q=1.0, m=1.0, b=1.0, nu=0.0, t_par=1.0)
    for key, val in (cfg.get("params") or {}).items():
        if key not in p:
            raise ConfigError(f"params.{key}: unknown field")
        p[key] = _number("params", key, val, allow_zero=(key == "nu"))
    params = PlasmaParams(**p)

    modes_raw = cfg.get("modes", DEFAULT_MODES[name])
    modes: list[tuple[int, int, int]] = []
    if modes_raw is not None:
        for i, k in enumerate(modes_raw):
            if not isinstance(k, (list, tuple)) or len(k) != 3 or any(
                    not isinstance(x, (int, float)) or isinstance(x, bool) or int(x) != x for x in k):
                raise ConfigError(f"modes[{i}]: expected three integers, got {k!r}")
            kk = tuple(int(x) for x in k)
            if kk == (0, 0, 0):
                raise ConfigError(f"modes[{i}]: wavevector must be nonzero")
            modes.append(kk)

    data = {"amplitude": 1.0, "center": list(DEFAULT_CENTER.get(name, (0.5, 0.3, 0.0))), "widths": [1.0, 1.0, 1.0],
            "real_field": False}
    for key, val in (cfg.get("data") or {}).items():
        if key not in data:
            raise ConfigError(f"data.{key}: unknown field")
        if key in ("center", "widths"):
            if not isinstance(val, (list, tuple)) or len(val) != 3:
                raise ConfigError(f"data.{key}: expected three numbers")
            val = [_number("data", key, x, positive=(key == "widths")) for x in val]
        elif key == "amplitude":
            val = _number("data", key, val, positive=False)
        else:
            val = bool(val)
        data[key] = val

    numerics = dict(DEFAULT_NUMERICS[name])
    for key, val in (cfg.get("numerics") or {}).items():
        if key not in numerics:
            raise ConfigError(f"numerics.{key}: unknown field for {name}")
        if isinstance(val, (int, float)) and not isinstance(val, bool):
            _number("numerics", key, val, allow_zero=key in ("energy_every",))
        numerics[key] = val
    for key in TOLERANCE_KEYS:
        if key in numerics:
            numerics[key] = numerics[key] * tol_scale
    if "nus" in numerics:
        numerics["nus"] = [_number("numerics", "nus", x, allow_zero=True) for x in numerics["nus"]]

    eq_cfg = cfg.get("equilibrium") or {}
    eq = Equilibrium(params.t_par, tuple(tuple(map(float, c)) for c in eq_cfg.get("perturbation", ())))
    sign = float(cfg.get("interaction_sign", 1.0))
    if sign not in (1.0, -1.0):
        raise ConfigError("interaction_sign: must be +1 or -1")
    root = Path(out or os.environ.get(OUT_ENV, "magvlasov_out"))
    return ExperimentSetup(name, params, modes, data, numerics, eq, root / name, sign, cfg)


# --- output helpers ---------------------------------------------------------------------------

class Artifacts:
    """Collects output files; each file is written once and listed once in the manifest."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _register(self, name: str, description: str) -> Path:
        if name in self.files:
            raise RuntimeError(f"artifact {name} written twice")
        self.files[name] = description
        return self.root / name

    def csv(self, name: str, header: list[str], rows, description: str):
        path = self._register(name, description)
        arr = np.asarray(rows, dtype=float)
        if arr.ndim == 1:
            arr = arr[None, :]
        np.savetxt(path, arr, delimiter=",", header=",".join(header), comments="", fmt="%.17g")

    def json(self, name: str, payload, description: str):
        path = self._register(name, description)
        path.write_text(json.dumps(_plain(payload), indent=2, sort_keys=True) + "\n")

    def manifest(self, setup: ExperimentSetup, results: dict, wall: float, status: int):
        entries = []
        for name, desc in sorted(self.files.items()):
            digest = hashlib.sha256((self.root / name).read_bytes()).hexdigest()
            entries.append({"path": name, "description": desc, "sha256": digest})
        man = {
            "experiment": setup.name,
            "status": "pass" if status == 0 else "fail",
            "config": setup.raw,
            "resolved": {"params": vars(setup.params), "modes": setup.modes, "data": setup.data,
                         "numerics": setup.numerics, "equilibrium": list(setup.equilibrium.perturbation),
                         "interaction_sign": setup.interaction_sign},
            "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__,
                         "magvlasov": _version(), "backend": _backend.NAME},
            "wall_time_s": wall,
            "results": results,
            "files": entries,
        }
        (self.root / "manifest.json").write_text(json.dumps(_plain(man), indent=2, sort_keys=True) + "\n")


def _version() -> str:
    from . import __version__

    return __version__


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _tag(k) -> str:
    return "k" + "_".join(str(x) for x in k)


def _pmap(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


# --- experiments ------------------------------------------------------------------------------

def run_bessel_check(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .specfun import check_identities

    num = setup.numerics
    rows = []
    for a in num["a_values"]:
        rep = check_identities(float(a), int(num["n_max"]), num["tol"])
        rows.append([a, num["n_max"], rep.recurrence, rep.generating, rep.first_moment, rep.tail_bound])
    art.csv("bessel_identities.csv", ["a", "n_max", "recurrence", "generating", "first_moment", "tail_bound"],
            rows, "scaled residuals of the three Bessel identities")
    worst = max(max(r[2:5]) for r in rows)
    return {"max_residual": worst, "tol": num["tol"]}, int(not worst < num["tol"])


def _margin_job(k, params, eq, sign, num):
    from .dispersion import stability_margin, winding_number

    mode = ModeContext.from_k(k, params, sign)
    m = stability_margin(mode, params, eq, num["lambda_max"], num["omega_max"], tuple(num["grid"]))
    w = winding_number(mode, params, eq, num["winding_omega_max"], int(num["winding_samples"]))
    return [*k, m.kappa, m.argmin.real, m.argmin.imag, w]


def run_dispersion_scan(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .dispersion import dispersion_table

    num = setup.numerics
    rows = _pmap(_margin_job, [(k, setup.params, setup.equilibrium, setup.interaction_sign, num)
                               for k in setup.modes if k[2] != 0], workers)
    for k in setup.modes:
        mode = setup.mode(k)
        omega = np.linspace(-num["omega_max"], num["omega_max"], int(num["scan_points"]))
        offset = num["axis_offset"] if k[2] == 0 else 0.0
        table = dispersion_table(offset + 1j * omega, mode, setup.params, setup.equilibrium)
        art.csv(f"dispersion_{_tag(k)}.csv", ["re_z", "im_z", "re_L", "im_L", "abs_1_minus_L"], table,
                f"L along the line Re z = {offset} for mode {k}")
    if rows:
        art.csv("stability.csv", ["k1", "k2", "k3", "kappa", "re_argmin", "im_argmin", "winding"], rows,
                "stability margin and winding number per mode")
    stable = all(r[3] > 0 and r[6] == 0 for r in rows)
    return {"modes": [{"k": r[:3], "kappa": r[3], "winding": r[6]} for r in rows], "all_stable": stable}, 0


def penrose_classes(k_max: float) -> list[tuple[int, int, int]]:
    """One representative per (|k_perp|^2, |k3|) class with k3 != 0 and |k| <= k_max."""
    reps = {}
    kk = int(math.floor(k_max))
    for k1 in range(0, kk + 1):
        for k2 in range(0, k1 + 1):
            for k3 in range(1, kk + 1):
                if k1 * k1 + k2 * k2 + k3 * k3 <= k_max * k_max + 1e-12:
                    reps.setdefault((k1 * k1 + k2 * k2, k3), (k1, k2, k3))
    return sorted(reps.values(), key=lambda k: (k[0] ** 2 + k[1] ** 2 + k[2] ** 2, k))


def run_penrose_scan(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    num = setup.numerics
    modes = setup.modes or penrose_classes(num["k_max"])
    if any(k[2] == 0 for k in modes):
        raise ConfigError("modes: the Penrose scan needs k3 != 0 for every mode")
    rows = _pmap(_margin_job, [(k, setup.params, setup.equilibrium, setup.interaction_sign, num) for k in modes],
                 workers)
    art.csv("penrose.csv", ["k1", "k2", "k3", "kappa", "re_argmin", "im_argmin", "winding"], rows,
            "stability margin and winding number per representative mode")
    stable = all(r[3] > 0 and r[6] == 0 for r in rows)
    return {"n_modes": len(rows), "min_kappa": min(r[3] for r in rows),
            "windings": sorted({int(r[6]) for r in rows}), "all_stable": stable}, 0


def run_bernstein(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .bernstein import residues

    num = setup.numerics
    data = setup.initial_data()
    out = {}
    for k in setup.modes:
        mode = setup.mode(k)
        dec = residues(mode, setup.params, data, int(num["n_max"]), num["tol"])
        rows = [[md.n, md.b_n, md.offset, md.r_plus.real, md.r_plus.imag, md.r_minus.real, md.r_minus.imag]
                for md in dec.modes]
        art.csv(f"bernstein_{_tag(k)}.csv", ["n", "b_n", "offset", "re_r_plus", "im_r_plus", "re_r_minus",
                                             "im_r_minus"], rows, f"Bernstein frequencies and residues for {k}")
        art.json(f"bernstein_{_tag(k)}.json", dec.to_json(), f"standing-wave decomposition for {k}")
        out[_tag(k)] = {"n_modes": len(dec.modes), "tail_estimate": dec.truncation_estimate,
                        "zero_interval_root": dec.zero_interval_root}
    return out, 0


def _volterra_job(k, params, data, eq, sign, dt, t_end, guard):
    from .volterra import solve_mode

    mode = ModeContext.from_k(k, params, sign)
    return solve_mode(mode, params, data, dt, t_end, eq, guard=guard).table()


def run_volterra(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    num = setup.numerics
    data = setup.initial_data()
    tables = _pmap(_volterra_job, [(k, setup.params, data, setup.equilibrium, setup.interaction_sign, num["dt"],
                                    num["t_end"], num["guard"]) for k in setup.modes], workers)
    out = {}
    for k, tab in zip(setup.modes, tables):
        art.csv(f"volterra_{_tag(k)}.csv", ["t", "re_rho", "im_rho", "abs_rho"], tab, f"density mode {k}")
        out[_tag(k)] = {"max_abs_rho": float(tab[:, 3].max()), "final_abs_rho": float(tab[-1, 3])}
    return out, 0


def _kin_cfg(num):
    from .kinsim import KinConfig

    return KinConfig(extent=num["extent"], n=num.get("n"), dt=num["dt"], energy_every=int(num.get("energy_every", 0)))


def run_oracle(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .kinsim import simulate_modes, total_energy_series

    num = setup.numerics
    data = setup.initial_data()
    modes = [setup.mode(k) for k in setup.modes]
    res = simulate_modes(modes, setup.params, data, num["t_end"], setup.equilibrium, _kin_cfg(num), workers)
    out = {}
    for k, r in zip(setup.modes, res):
        art.csv(f"oracle_{_tag(k)}.csv", ["t", "re_rho", "im_rho", "abs_rho"], r.series().table(),
                f"kinetic-oracle density mode {k}")
        out[_tag(k)] = {"layout": r.layout, "boundary_fraction": r.boundary_fraction}
    if num.get("energy_every"):
        _energy_csv(art, "oracle_energies.csv", res)
        t, e0, e1, g = total_energy_series(res)
        out["e0_drift"] = float(np.max(np.abs(e0 / e0[0] - 1.0)))
    return out, 0


def _energy_csv(art, name, res):
    from .kinsim import total_energy_series

    t, e0, e1, g = total_energy_series(res)
    every = int(round((t[1] - t[0]) / res[0].dt)) if len(t) > 1 else 1
    cols = [t, e0, e1, g] + [np.abs(r.rho[::every][: len(t)]) for r in res]
    art.csv(name, ["t", "E0", "E1", "G"] + [f"abs_rho_{_tag(r.mode.k)}" for r in res], np.column_stack(cols),
            "energy diagnostics summed over the represented modes")


def run_cross_validate(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .bernstein import reconstruct, residues
    from .kinsim import simulate
    from .volterra import solve_mode

    num = setup.numerics
    data = setup.initial_data()
    out, worst = {}, 0.0
    for k in setup.modes:
        mode = setup.mode(k)
        vol = solve_mode(mode, setup.params, data, num["volterra_dt"], num["t_end"], setup.equilibrium)
        stride = int(round(num["dt"] / num["volterra_dt"]))
        if not math.isclose(stride * num["volterra_dt"], num["dt"], rel_tol=1e-9):
            raise ConfigError("numerics.dt: must be an integer multiple of numerics.volterra_dt")
        kin = simulate(mode, setup.params, data, num["t_end"], setup.equilibrium, _kin_cfg(num))
        v = vol.values[::stride][: len(kin.rho)]
        cols = [kin.series().t, v.real, v.imag, kin.rho.real, kin.rho.imag]
        header = ["t", "re_volterra", "im_volterra", "re_oracle", "im_oracle"]
        scale = float(np.max(np.abs(v)))
        disc = {"volterra_vs_oracle": float(np.max(np.abs(v - kin.rho))) / scale}
        if k[2] == 0 and setup.params.nu == 0:
            dec = residues(mode, setup.params, data, int(num["n_max"]))
            rec = reconstruct(dec, kin.series().t).values
            cols += [rec.real, rec.imag]
            header += ["re_bernstein", "im_bernstein"]
            disc["volterra_vs_bernstein"] = float(np.max(np.abs(v - rec))) / scale
            disc["oracle_vs_bernstein"] = float(np.max(np.abs(kin.rho - rec))) / scale
        art.csv(f"crossval_{_tag(k)}.csv", header, np.column_stack(cols), f"three-way comparison for {k}")
        out[_tag(k)] = disc
        worst = max(worst, max(disc.values()))
    out["max_discrepancy"] = worst
    out["tol"] = num["tol"]
    return out, int(not worst < num["tol"])


def run_enhanced_scaling(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .analysis import relaxation_exponent

    num = setup.numerics
    data = setup.initial_data()
    out = {}
    for k in setup.modes:
        fit = relaxation_exponent(setup.mode(k), setup.params, num["nus"], num["source"], data,
                                  float(num["threshold"]))
        art.csv(f"scaling_{_tag(k)}.csv", ["nu", "t_e"], fit.table(), f"e-folding times for {k}")
        out[_tag(k)] = {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}
    art.json("scaling_fits.json", out, "least-squares fits of log t_e against log nu")
    return out, 0


def _energy_job(nu, modes, params, data, eq, sign, num):
    from .kinsim import simulate_modes

    p = params.with_nu(nu)
    ctx = [ModeContext.from_k(k, p, sign) for k in modes]
    return simulate_modes(ctx, p, data, num["t_end"], eq, _kin_cfg(num))


def run_energy_decay(setup: ExperimentSetup, art: Artifacts, workers: int) -> tuple[dict, int]:
    from .kinsim import hypocoercive_decay, total_energy_series

    num = setup.numerics
    if not num.get("energy_every"):
        raise ConfigError("numerics.energy_every: must be positive for energy-decay")
    data = setup.initial_data()
    runs = _pmap(_energy_job, [(nu, setup.modes, setup.params, data, setup.equilibrium, setup.interaction_sign, num)
                               for nu in num["nus"]], workers)
    out = {}
    for nu, res in zip(num["nus"], runs):
        _energy_csv(art, f"energy_nu{nu:g}.csv", res)
        t, e0, e1, g = total_energy_series(res)
        fit = hypocoercive_decay(t, e0 + e1, nu)
        out[f"nu={nu:g}"] = {"rate": fit.rate, "rate_over_nu": fit.rate / nu if nu > 0 else None,
                             "window": list(fit.window), "warning": fit.warning,
                             "e0_max_increase": float(np.max(np.diff(e0))) if len(e0) > 1 else 0.0,
                             "e0_drift": float(np.max(np.abs(e0 / e0[0] - 1.0)))}
    return out, 0


RUNNERS = {
    "bessel-check": run_bessel_check,
    "dispersion-scan": run_dispersion_scan,
    "bernstein": run_bernstein,
    "volterra-run": run_volterra,
    "oracle-run": run_oracle,
    "cross-validate": run_cross_validate,
    "penrose-scan": run_penrose_scan,
    "enhanced-scaling": run_enhanced_scaling,
    "energy-decay": run_energy_decay,
}


def run(setup: ExperimentSetup, workers: int = 1) -> int:
    start = time.perf_counter()
    art = Artifacts(setup.output_dir)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        results, status = RUNNERS[setup.name](setup, art, workers)
    if caught:
        results = dict(results)
        results["warnings"] = sorted({str(w.message) for w in caught})
    art.manifest(setup, results, time.perf_counter() - start, status)
    return status


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="magvlasov", description="Linearized magnetized Vlasov experiments")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON or YAML configuration file")
    parser.add_argument("--out", help=f"output root (default ${OUT_ENV} or ./magvlasov_out)")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--tol-scale", type=float, default=1.0, help="multiplies every tolerance in the config")
    args = parser.parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers: must be at least 1")
        if not args.tol_scale > 0:
            raise ConfigError("--tol-scale: must be positive")
        setup = build_setup(args.experiment, load_config(args.config), args.out, args.tol_scale)
        status = run(setup, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        origin = type(exc).__module__.replace("magvlasov.", "")
        print(f"numerical failure in {origin}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"{args.experiment}: {'pass' if status == 0 else 'fail'} -> {setup.output_dir}")
    return status


if __name__ == "__main__":
    sys.exit(main())
