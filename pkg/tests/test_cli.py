import csv
import hashlib
import json

import pytest

from magvlasov.cli import EXPERIMENTS, build_setup, main, penrose_classes
from magvlasov.model import ConfigError


def _write(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    if name.endswith(".json"):
        path.write_text(json.dumps(payload))
    else:
        import yaml

        path.write_text(yaml.safe_dump(payload))
    return str(path)


def _manifest(root, name):
    return json.loads((root / name / "manifest.json").read_text())


def test_bessel_check_default(tmp_path):
    assert main(["bessel-check", "--out", str(tmp_path)]) == 0
    man = _manifest(tmp_path, "bessel-check")
    assert man["results"]["max_residual"] < 1e-10
    with open(tmp_path / "bessel-check" / "bessel_identities.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "a" and len(rows) == 6


def test_zero_wavevector_config(tmp_path, capsys):
    cfg = _write(tmp_path, {"modes": [[1, 0, 0], [0, 0, 0]]})
    assert main(["volterra-run", "--config", cfg, "--out", str(tmp_path)]) != 0
    assert "wavevector must be nonzero" in capsys.readouterr().err


@pytest.mark.parametrize("payload,field", [
    ({"params": {"nu": -1}}, "params.nu"),
    ({"params": {"mass": 1}}, "params.mass"),
    ({"numerics": {"dt": 0}}, "numerics.dt"),
    ({"numerics": {"grid": 3}}, "numerics.grid"),
    ({"data": {"widths": [1, 0, 1]}}, "data.widths"),
    ({"modes": [[1, 0]]}, "modes[0]"),
])
def test_field_level_messages(tmp_path, capsys, payload, field):
    cfg = _write(tmp_path, payload)
    assert main(["volterra-run", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert field in capsys.readouterr().err


def test_yaml_config_and_env_root(tmp_path, monkeypatch):
    cfg = _write(tmp_path, {"modes": [[2, 1, 0]], "numerics": {"dt": 0.05, "t_end": 2.0}}, "cfg.yaml")
    monkeypatch.setenv("MAGVLASOV_OUT", str(tmp_path / "env"))
    assert main(["volterra-run", "--config", cfg]) == 0
    assert (tmp_path / "env" / "volterra-run" / "volterra_k2_1_0.csv").exists()


def test_outputs_are_deterministic_and_listed(tmp_path):
    cfg = _write(tmp_path, {"modes": [[1, 0, 0], [1, 0, 1]], "numerics": {"dt": 0.02, "t_end": 5.0}})
    for sub in ("a", "b"):
        assert main(["volterra-run", "--config", cfg, "--out", str(tmp_path / sub)]) == 0
    for name in ("volterra_k1_0_0.csv", "volterra_k1_0_1.csv"):
        assert (tmp_path / "a" / "volterra-run" / name).read_bytes() == (tmp_path / "b" / "volterra-run" / name).read_bytes()
    man = _manifest(tmp_path / "a", "volterra-run")
    listed = sorted(e["path"] for e in man["files"])
    on_disk = sorted(p.name for p in (tmp_path / "a" / "volterra-run").iterdir() if p.name != "manifest.json")
    assert listed == on_disk
    for entry in man["files"]:
        data = (tmp_path / "a" / "volterra-run" / entry["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == entry["sha256"]
    assert man["versions"]["backend"] in ("compiled", "python")
    assert man["config"]["numerics"]["dt"] == 0.02


def test_worker_pool_matches_serial(tmp_path):
    cfg = _write(tmp_path, {"modes": [[1, 0, 0], [0, 0, 1]], "numerics": {"dt": 0.05, "t_end": 3.0}})
    main(["volterra-run", "--config", cfg, "--out", str(tmp_path / "s")])
    main(["volterra-run", "--config", cfg, "--out", str(tmp_path / "p"), "--workers", "2"])
    for name in ("volterra_k1_0_0.csv", "volterra_k0_0_1.csv"):
        assert (tmp_path / "s" / "volterra-run" / name).read_bytes() == (tmp_path / "p" / "volterra-run" / name).read_bytes()


def test_tol_scale_multiplies_tolerances():
    setup = build_setup("bessel-check", {}, "/tmp/unused", 10.0)
    assert setup.numerics["tol"] == pytest.approx(1e-9)
    with pytest.raises(ConfigError):
        build_setup("bessel-check", {"extra": 1}, None, 1.0)


def test_cross_validate_default(tmp_path):
    assert main(["cross-validate", "--out", str(tmp_path)]) == 0
    res = _manifest(tmp_path, "cross-validate")["results"]
    assert res["max_discrepancy"] < 1e-3
    assert set(res["k1_0_0"]) == {"volterra_vs_oracle", "volterra_vs_bernstein", "oracle_vs_bernstein"}


def test_scaling_and_bernstein_outputs(tmp_path):
    assert main(["enhanced-scaling", "--out", str(tmp_path)]) == 0
    fits = json.loads((tmp_path / "enhanced-scaling" / "scaling_fits.json").read_text())
    assert abs(fits["k0_0_1"]["slope"] + 1 / 3) < 0.03
    assert main(["bernstein", "--out", str(tmp_path)]) == 0
    dec = json.loads((tmp_path / "bernstein" / "bernstein_k1_0_0.json").read_text())
    assert all(0 < m["offset"] < 1 for m in dec["modes"] if m["has_root"])


def test_attractive_scan_reports_instability(tmp_path):
    cfg = _write(tmp_path, {"params": {"q": 5.0, "b": 0.2}, "modes": [[0, 0, 1]], "interaction_sign": -1})
    assert main(["dispersion-scan", "--config", cfg, "--out", str(tmp_path)]) == 0
    res = _manifest(tmp_path, "dispersion-scan")["results"]
    assert res["modes"][0]["winding"] == 1 and not res["all_stable"]


def test_numerical_failure_names_module(tmp_path, capsys):
    cfg = _write(tmp_path, {"params": {"q": 5.0, "b": 0.2}, "modes": [[0, 0, 1]], "interaction_sign": -1,
                            "numerics": {"t_end": 100.0}})
    assert main(["volterra-run", "--config", cfg, "--out", str(tmp_path)]) == 3
    assert "volterra" in capsys.readouterr().err


def test_penrose_classes_cover_ball():
    reps = penrose_classes(4.0)
    assert len(reps) == 23
    assert all(k[2] != 0 and sum(x * x for x in k) <= 16 for k in reps)


def test_all_experiments_have_defaults():
    for name in EXPERIMENTS:
        build_setup(name, {}, "/tmp/unused", 1.0)
