import json
import subprocess
import sys

import pytest

from hfk.cli import ARCHIVE_SCHEMA, ARCHIVE_VERSION, emit_plot_data, load_config, main
from hfk.errors import ConfigError

SCHW = {"variant": "SchwarzschildIsotropic", "m": 1.0}
SMALL = {"L_max": 8, "grid": [18, 18]}


def _config(tmp_path, name="cfg.json", **kw):
    path = tmp_path / name
    path.write_text(json.dumps(kw))
    return path


def _run(tmp_path, kind, out="out", **kw):
    cfg = _config(tmp_path, **kw)
    return main([kind, "--config", str(cfg), "--out", str(tmp_path / out)]), tmp_path / out


def test_validate_euclidean(tmp_path):
    code, out = _run(tmp_path, "validate", model={"variant": "Euclidean"}, radii=[1.0, 5.0])
    assert code == 0
    body = (out / "validate.csv").read_text().splitlines()
    assert body[0] == "r,check,value,tolerance,passed"
    assert all(line.endswith(",1") for line in body[1:])


def test_validate_momentum_model(tmp_path):
    model = {"variant": "HarmonicAsymptotics", "m": 1.0, "p": [0.1, 0.0, 0.0],
             "dec_padding": 0.02}
    code, out = _run(tmp_path, "validate", model=model, radii=[8.0, 20.0])
    assert code == 0
    assert "W2_leibniz" in (out / "validate.csv").read_text()


def test_unknown_key_is_config_error(tmp_path):
    code, _ = _run(tmp_path, "validate", model=SCHW, radii=[8.0], colour="blue")
    assert code == 2
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, model=SCHW, radii=[8.0], colour="blue"), "validate")


@pytest.mark.parametrize("bad", [{"radii": [16.0, 8.0]}, {"radii": [2.0]}, {"L_max": 3},
                                 {"tol": 0.0}, {"beta": 0.5}, {"grid": [10, 10]},
                                 {"model": {"variant": "Nope"}}])
def test_invalid_configs(tmp_path, bad):
    kw = {"model": SCHW, "radii": [8.0]}
    kw.update(bad)
    with pytest.raises(ConfigError):
        load_config(_config(tmp_path, **kw), "solve-leaf")


def test_solve_leaf_is_deterministic(tmp_path):
    kw = dict(model=SCHW, radii=[8.0], minimize=False, xi=[0.05, 0.0, 0.0], **SMALL)
    c1, a = _run(tmp_path, "solve-leaf", out="a", **kw)
    c2, b = _run(tmp_path, "solve-leaf", out="b", **kw)
    assert c1 == c2 == 0
    for name in ("leaves.csv", "leaves.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    arch = json.loads((a / "leaves.json").read_text())
    assert arch["schema"] == ARCHIVE_SCHEMA and arch["version"] == ARCHIVE_VERSION
    assert len(arch["leaves"][0]["coefficients"]) == 81
    man = json.loads((a / "manifest.json").read_text())
    assert man["status"] == 0 and man["config"]["radii"] == [8.0]
    assert {"numpy", "scipy", "backend", "python"} <= set(man["versions"])
    assert "wall_seconds" in man and "leaves.csv" in man["files"]


def test_solver_failure_exit_code(tmp_path):
    code, out = _run(tmp_path, "solve-leaf", model=SCHW, radii=[8.0], minimize=False,
                     xi=[0.2, 0.0, 0.0], max_iter=1, tol=1e-15, **SMALL)
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["status"] == 3


def test_drifted_foliation_exit_code(tmp_path):
    code, out = _run(tmp_path, "foliate", model=SCHW, radii=[8.0, 10.0],
                     xi_drift=[[0, 0, 0], [0.5, 0, 0]], **SMALL)
    assert code == 4
    assert "NotAFoliation" in json.loads((out / "manifest.json").read_text())["message"]
    assert (out / "foliation.csv").exists()


def test_energy_report_plot_files(tmp_path):
    code, out = _run(tmp_path, "energy-report", model=SCHW, radii=[8.0, 16.0], **SMALL)
    assert code == 0
    lines = (out / "plot_r_energy_error.dat").read_text().splitlines()
    assert len(lines) == 2 and all(len(line.split()) == 2 for line in lines)
    assert (out / "plot_r_hawking_energy.dat").exists()
    header = (out / "energy.csv").read_text().splitlines()[0]
    assert header.startswith("r,hawking_energy,energy_error")


def test_emit_plot_data_kinds():
    assert list(emit_plot_data("center-report", {"r": [8.0], "center_gap": [0.1]})) == \
        ["plot_r_center_gap.dat"]
    out = emit_plot_data("monotonicity-report", {"r": [8.0, 16.0], "int_f": [-1.0, -0.5]})
    assert out["plot_r_int_f.dat"].count("\n") == 2
    assert emit_plot_data("validate", {}) == {}


def test_console_entry_point(tmp_path):
    cfg = _config(tmp_path, model={"variant": "Euclidean"}, radii=[2.0])
    proc = subprocess.run([sys.executable, "-m", "hfk.cli", "validate", "--config", str(cfg),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
