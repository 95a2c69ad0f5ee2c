"""Config schema, file formats, checksums, and the command-line surface."""

import hashlib
import json
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from vibtune import (ConfigError, ExcitationGrid, FrfMatrix, PdGains,
                     RunManifest, format_float, load_config,
                     parse_grid_override, read_gains_json, sha256_file,
                     write_frf_csv, write_gains_json, write_trajectory_csv)
from vibtune.cli import main

MDOF_YAML = """
kind: mdof
seed: 3
output_dir: {out}
grid:
  amplitudes: [1.0, 2.0]
  frequencies: [5.0, 6.0, 7.0]
system:
  mass: [[1.0]]
  damping: [[0.4]]
  stiffness: [[36.0]]
  nonlinear: [[[1, 36.0]]]
"""


def _write(tmp_path, text, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_format_float_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(200):
        x = float(rng.standard_normal() * 10.0 ** rng.integers(-8, 8))
        assert float(format_float(x)) == x
    assert format_float(1.0) == "1"
    assert format_float(0.5) == "0.5"


def test_parse_grid_override():
    g = parse_grid_override("1:3:1,5:7:0.5")
    assert_allclose(g.amplitudes, [1.0, 2.0, 3.0])
    assert_allclose(g.frequencies, [5.0, 5.5, 6.0, 6.5, 7.0])
    for bad in ("1:3:1", "1:3,5:7:1", "a:b:c,5:7:1", "3:1:1,5:7:1"):
        with pytest.raises(ConfigError):
            parse_grid_override(bad)


def test_load_config_happy_path(tmp_path):
    cfg = load_config(_write(tmp_path, MDOF_YAML.format(out=tmp_path)))
    assert cfg.kind == "mdof"
    assert cfg.seed == 3
    assert cfg.grid.shape == (2, 3)
    assert cfg.system.nonlin == [[(1, 36.0)]]
    assert cfg.warm_start is True
    plant = cfg.make_plant()
    assert plant.system.stiffness[0, 0] == 36.0


def test_load_config_rejects_unknown_keys(tmp_path):
    bad_top = MDOF_YAML + "\nwhatever: 1\n"
    with pytest.raises(ConfigError, match="whatever"):
        load_config(_write(tmp_path, bad_top.format(out=tmp_path)))
    bad_nested = MDOF_YAML.format(out=tmp_path).replace(
        "  stiffness: [[36.0]]", "  stiffness: [[36.0]]\n  color: red")
    with pytest.raises(ConfigError, match="color"):
        load_config(_write(tmp_path, bad_nested))
    bad_grid = MDOF_YAML.format(out=tmp_path).replace(
        "  frequencies: [5.0, 6.0, 7.0]",
        "  frequencies: [5.0, 6.0, 7.0]\n  spacing: log")
    with pytest.raises(ConfigError, match="spacing"):
        load_config(_write(tmp_path, bad_grid))


def test_load_config_missing_and_malformed(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.yaml"))
    with pytest.raises(ConfigError):
        load_config(_write(tmp_path, "kind: mdof\ngrid: [not, a, mapping]\n"))
    with pytest.raises(ConfigError, match="kind"):
        load_config(_write(tmp_path, "kind: frequency-domain\n"))


def test_frf_csv_format(tmp_path):
    frf = FrfMatrix("x1", np.array([1.0, 2.0]), np.array([5.0, 6.0]),
                    np.array([[0.1, 0.25], [0.1, 0.3]]))
    path = str(tmp_path / "frf_x1.csv")
    write_frf_csv(path, frf)
    lines = open(path).read().splitlines()
    assert lines[0] == r"amplitude\frequency,5,6"
    assert lines[1] == "1,0.10000000000000001,0.25"
    assert lines[2] == "2,0.10000000000000001,0.29999999999999999"


def test_trajectory_csv_format(tmp_path):
    path = str(tmp_path / "trajectory_x.csv")
    write_trajectory_csv(path, np.array([0.0, 0.5]),
                         {"x1": np.array([1.0, 2.0]), "w": np.array([0.0, -1.0])})
    lines = open(path).read().splitlines()
    assert lines[0] == "t,x1,w"
    assert lines[1] == "0,1,0"
    assert lines[2] == "0.5,2,-1"


def test_gains_json_round_trip(tmp_path):
    path = str(tmp_path / "gains.json")
    gains = PdGains.diagonal([4.25, 1.0], [3.18, 0.5])
    write_gains_json(path, gains, "converged")
    back = read_gains_json(path)
    assert_allclose(back.theta_p, gains.theta_p)
    assert_allclose(back.theta_d, gains.theta_d)
    payload = json.load(open(path))
    assert payload["status"] == "converged"
    assert_allclose(payload["theta_p_diag"], [4.25, 1.0])


def test_manifest_checksums(tmp_path):
    f1 = tmp_path / "a.csv"
    f1.write_text("x,y\n1,2\n")
    man = RunManifest("frf", "success", 0, {"kind": "mdof"}, 1.5)
    man.add_file(str(tmp_path), "a.csv")
    man.write(str(tmp_path))
    payload = json.load(open(tmp_path / "manifest.json"))
    digest = hashlib.sha256(f1.read_bytes()).hexdigest()
    assert payload["files"]["a.csv"] == f"sha256:{digest}"
    assert payload["command"] == "frf"
    assert payload["seed"] == 0
    assert sha256_file(str(f1)) == digest
    assert not [p for p in os.listdir(tmp_path) if p.endswith(".tmp")]


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------


def test_cli_frf_and_reproducibility(tmp_path):
    cfg = _write(tmp_path, MDOF_YAML.format(out=tmp_path / "r"))
    out1, out2 = str(tmp_path / "o1"), str(tmp_path / "o2")
    assert main(["frf", "--config", cfg, "--out", out1]) == 0
    assert main(["frf", "--config", cfg, "--out", out2]) == 0
    b1 = open(os.path.join(out1, "frf_x1.csv"), "rb").read()
    b2 = open(os.path.join(out2, "frf_x1.csv"), "rb").read()
    assert b1 == b2
    man = json.load(open(os.path.join(out1, "manifest.json")))
    assert set(man["files"]) == {"frf_x1.csv", "frf_x2.csv"}
    for name, tagged in man["files"].items():
        assert tagged == "sha256:" + sha256_file(os.path.join(out1, name))


def test_cli_preset_resolution(tmp_path):
    out = str(tmp_path / "p")
    code = main(["frf", "--config", "duffing-linear", "--out", out,
                 "--grid-override", "1:1:1,6:6:1"])
    assert code == 0
    header = open(os.path.join(out, "frf_x1.csv")).readline().strip()
    assert header == r"amplitude\frequency,6"


def test_cli_config_error_exit_2(tmp_path):
    assert main(["frf", "--config", str(tmp_path / "missing.yaml")]) == 2
    bad = _write(tmp_path, MDOF_YAML.format(out=tmp_path) + "\nmystery: 1\n")
    assert main(["frf", "--config", bad]) == 2


def test_cli_sweep_failure_exit_3(tmp_path, capsys):
    text = MDOF_YAML.format(out=tmp_path / "f") + (
        "integrator:\n  max_periods: 8\n  ss_rel_tol: 1.0e-13\n")
    cfg = _write(tmp_path, text)
    assert main(["frf", "--config", cfg]) == 3
    assert "failed" in capsys.readouterr().err


def test_cli_tune_max_iterations_exit_4(tmp_path):
    # targets far below the floor response, so one step cannot settle
    text = MDOF_YAML.format(out=tmp_path / "t") + (
        "adaptation:\n  max_iterations: 1\n  delta_x1: 0.01\n  delta_x2: 0.01\n")
    cfg = _write(tmp_path, text)
    out = str(tmp_path / "t")
    assert main(["tune", "--config", cfg, "--out", out]) == 4
    # artifacts still written for post-mortem
    for name in ("gains.json", "tuning_history.csv", "tuning_history.json",
                 "manifest.json"):
        assert os.path.exists(os.path.join(out, name))
    hist = json.load(open(os.path.join(out, "tuning_history.json")))
    assert hist["status"] == "max-iterations"
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert man["status"] == "max-iterations"


def test_cli_tune_writes_history_columns(tmp_path):
    text = MDOF_YAML.format(out=tmp_path / "t2") + (
        "adaptation:\n  max_iterations: 1\n  probe: false\n")
    cfg = _write(tmp_path, text)
    out = str(tmp_path / "t2")
    main(["tune", "--config", cfg, "--out", out])
    header = open(os.path.join(out, "tuning_history.csv")).readline().strip()
    cols = header.split(",")
    assert cols[0] == "iteration"
    assert any(c.startswith("theta_p") for c in cols)
    assert any(c.startswith("fnorm_x1") for c in cols)


def test_cli_simulate_writes_cases_and_summary(tmp_path):
    base = MDOF_YAML.format(out=tmp_path / "s") + (
        "simulate:\n  amplitude: 2.0\n  frequency: 6.0\n  horizon: 20.0\n")
    cfg = _write(tmp_path, base)
    out = str(tmp_path / "s")
    gains_path = str(tmp_path / "g.json")
    write_gains_json(gains_path, PdGains.diagonal([4.0], [3.0]))
    assert main(["simulate", "--config", cfg, "--out", out,
                 "--gains", gains_path]) == 0
    for name in ("trajectory_uncontrolled.csv", "trajectory_controlled.csv",
                 "simulation_summary.json", "manifest.json"):
        assert os.path.exists(os.path.join(out, name))
    summary = json.load(open(os.path.join(out, "simulation_summary.json")))
    peaks = summary["peak_displacement"]
    assert peaks["controlled"] < peaks["uncontrolled"]
    header = open(os.path.join(out, "trajectory_uncontrolled.csv")).readline()
    assert header.strip() == "t,x1,x2,w,u"


def test_cli_converge_check_mdof(tmp_path):
    text = MDOF_YAML.format(out=tmp_path / "c") + (
        "convergence:\n  amplitude: 2.0\n  frequency: 6.0\n  horizon: 60.0\n"
        "  n_samples: 16\n")
    cfg = _write(tmp_path, text)
    out = str(tmp_path / "c")
    assert main(["converge-check", "--config", cfg, "--out", out]) == 0
    report = json.load(open(os.path.join(out, "convergence_report.json")))
    assert report["multi_ic"]["passed"] is True
    assert report["multi_ic"]["terminal_max_distance"] < 1e-3
    assert "verdict" in report["jacobian"]


def test_cli_seed_override_changes_manifest(tmp_path):
    cfg = _write(tmp_path, MDOF_YAML.format(out=tmp_path / "m"))
    out = str(tmp_path / "m")
    main(["frf", "--config", cfg, "--out", out, "--seed", "99"])
    man = json.load(open(os.path.join(out, "manifest.json")))
    assert man["seed"] == 99
