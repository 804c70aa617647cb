import json

import pytest

from fflsim.cli import main
from fflsim.experiment import RESULT_FIELDS, ConfigError, ExperimentConfig, run_experiment


def write_config(tmp_path, **over):
    cfg = {"scenario": {"kind": "two_agent_regression", "mean": 2.0},
           "mechanism": "ffl",
           "sweep": {"variable": "gamma", "grid": [0.5, 1.0, 2.0], "agent": 0},
           "repetitions": 2, "seed": 3,
           "ffl": {"t1": 200, "t2": 10, "epsilon": 1e-4}}
    cfg.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return path


def test_run_writes_csv_and_manifest(tmp_path):
    path = write_config(tmp_path)
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "out")]) == 0
    lines = (tmp_path / "out" / "results.csv").read_text().splitlines()
    assert lines[0].split(",") == RESULT_FIELDS
    # 3 grid points x 2 repetitions x (2 agents + aggregate)
    assert len(lines) == 1 + 3 * 2 * 3
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    assert manifest["errors"] == [] and manifest["config"]["seed"] == 3
    assert "prop3" in (tmp_path / "out" / "results.csv").read_text()


def test_same_seed_same_bytes_across_threads(tmp_path):
    path = write_config(tmp_path, mechanism="dpffl", dp={"alpha": 5.0, "l_f": 50.0, "clip": True})
    main(["run", "--config", str(path), "--out", str(tmp_path / "a")])
    main(["run", "--config", str(path), "--out", str(tmp_path / "b"), "--threads", "4"])
    main(["run", "--config", str(path), "--out", str(tmp_path / "c"), "--seed", "4"])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert a != (tmp_path / "c" / "results.csv").read_bytes()


def test_failing_point_is_recorded(tmp_path):
    cfg = ExperimentConfig.from_dict({
        "scenario": {"kind": "ridge", "K": 3, "sizes": 20, "seed": 0},
        "mechanism": "dpffl", "sweep": {"variable": "L", "grid": [1, 3]}, "dp": {"alpha": 50.0}})
    manifest = run_experiment(cfg, tmp_path)
    assert len(manifest["errors"]) == 1
    assert "cluster complement empty" in manifest["errors"][0]["error"]


def test_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"scenario": {"kind": "ridge"}, "sweep": {"variable": "gamma", "grid": []}}))
    assert main(["run", "--config", str(bad)]) == 2
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": {"kind": "ridge"}, "typo": 1})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"scenario": {"kind": "ridge"}, "repetitions": 0})


def test_plan_commands(capsys):
    assert main(["plan", "--theorem", "1", "--mu", "0.5", "--l-g", "2.5", "--l-f", "0.7",
                 "--K", "20", "--epsilon", "0.1", "--G", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["t2"] == 5
    assert main(["plan", "--theorem", "3", "--mu", "0.1", "--l-g", "1", "--l-f", "1",
                 "--K", "10", "--epsilon", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["L"] == 10
    assert main(["plan", "--theorem", "prop9", "--mu", "0.1", "--l-g", "1", "--l-f", "1",
                 "--K", "10", "--epsilon", "0.1", "--eta2", "0.1"]) == 0
    assert json.loads(capsys.readouterr().out)["C"] == pytest.approx(0.91)
    assert main(["plan", "--theorem", "1", "--mu", "0.1", "--l-g", "1", "--l-f", "1",
                 "--K", "2", "--epsilon", "1e-6"]) == 2


def test_verify_subset_exit_code(capsys):
    assert main(["verify", "8", "6"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 8" in out and "Theorem 3" in out
