import csv
import json
from pathlib import Path

import numpy as np
import pytest

from hamlearn import cli
from hamlearn.cli import EXIT_CONFIG, EXIT_OK, EXIT_SCENARIO, main
from hamlearn.model import HamiltonianSpec, make_pair, project_block
from hamlearn.qspe import analytic_variance, forward_mapping

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def small_sweep(**over):
    cfg = {
        "schema_version": 1,
        "scenario": "sweep-d",
        "seed": 5,
        "spec": {"a": [10.0, 10.0], "c": [[0.0, 40.0], [40.0, 0.0]]},
        "experiment": {"d": 6, "N": 20000, "T": 0.001},
        "sweep": {"d": [3, 4, 6]},
        "n_boot": 100,
    }
    cfg.update(over)
    return cfg


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------- validate


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json")))
def test_shipped_configs_validate(name, capsys):
    assert main(["validate", str(CONFIGS / name)]) == EXIT_OK
    assert "error" not in capsys.readouterr().out


def test_validate_clean(tmp_path, capsys):
    assert main(["validate", write(tmp_path, small_sweep())]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_validate_missing_seed(tmp_path, capsys):
    cfg = small_sweep()
    del cfg["seed"]
    assert main(["validate", write(tmp_path, cfg)]) == EXIT_CONFIG
    assert "seed" in capsys.readouterr().out


def test_validate_regime_warning(tmp_path, capsys):
    # a T = 0.05 and d = 10 puts d * theta near 0.5
    cfg = small_sweep(experiment={"d": 10, "N": 100, "T": 0.005})
    assert main(["validate", write(tmp_path, cfg)]) == EXIT_OK
    assert "warning: regime" in capsys.readouterr().out


def test_validate_wrong_spec_size(tmp_path, capsys):
    spec = HamiltonianSpec.from_couplings(3, 10.0, {(1, 2): 20.0})
    cfg = small_sweep(spec=spec.to_dict())
    assert main(["validate", write(tmp_path, cfg)]) == EXIT_CONFIG
    assert "two-qubit" in capsys.readouterr().out


def test_json_parse_error_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "seed": 1,\n  "scenario": \n}\n')
    assert main(["validate", str(p)]) == EXIT_CONFIG
    assert "line 4" in capsys.readouterr().out


def test_unknown_scenario(tmp_path, capsys):
    assert main(["validate", write(tmp_path, small_sweep(scenario="fly"))]) == EXIT_CONFIG


# ---------------------------------------------------------------- run


def test_run_config_error_exit_code(tmp_path):
    cfg = small_sweep()
    del cfg["seed"]
    assert main(["run", write(tmp_path, cfg), "--output", str(tmp_path / "o")]) == EXIT_CONFIG


def test_run_scenario_failure_exit_code(tmp_path):
    cfg = small_sweep(spec={"a": [0.0, 10.0], "c": [[0.0, 40.0], [40.0, 0.0]]})
    assert main(["run", write(tmp_path, cfg), "--output", str(tmp_path / "o")]) == EXIT_SCENARIO


def test_sweep_outputs_and_predictions(tmp_path):
    out = tmp_path / "o"
    assert main(["run", write(tmp_path, small_sweep()), "--output", str(out)]) == EXIT_OK
    rows = read_csv(out / "sweep.csv")
    assert [int(r["d"]) for r in rows] == [3, 4, 6]
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = manifest["config"]
    spec = HamiltonianSpec.from_dict(cfg["spec"])
    T = cfg["experiment"]["T"]
    blk = project_block(spec, make_pair(0, 1, 2), T)
    theta = float(forward_mapping(blk.A, blk.B)[0])
    for r in rows:
        expect = analytic_variance(cfg["experiment"]["N"], int(r["d"]), theta, "analog")[1] / T**2
        assert float(r["var_pred"]) == pytest.approx(expect, rel=1e-12)
        assert float(r["cr_bound"]) == float(r["var_pred"])
    assert len({r["slope_fit"] for r in rows}) == 1


def test_replay_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", write(tmp_path, small_sweep()), "--output", str(a)]) == EXIT_OK
    assert main(["run", str(a / "manifest.json"), "--output", str(b)]) == EXIT_OK
    for name in ("report.json", "sweep.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_threads_do_not_change_output(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    path = write(tmp_path, small_sweep())
    assert main(["run", path, "--output", str(a)]) == EXIT_OK
    assert main(["run", path, "--output", str(b), "--threads", "4"]) == EXIT_OK
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_seed_override_changes_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    path = write(tmp_path, small_sweep())
    main(["run", path, "--output", str(a)])
    main(["run", path, "--output", str(b), "--seed", "6"])
    assert (a / "sweep.csv").read_bytes() != (b / "sweep.csv").read_bytes()
    assert json.loads((b / "manifest.json").read_text())["seed"] == 6


def test_output_env_variable(tmp_path, monkeypatch):
    monkeypatch.setenv("HAMLEARN_OUTPUT", str(tmp_path / "env"))
    assert main(["run", write(tmp_path, small_sweep(sweep={"d": [3, 4]}))]) == EXIT_OK
    assert (tmp_path / "env" / "report.json").exists()
    # the command line wins over the environment
    assert main(["run", write(tmp_path, small_sweep(sweep={"d": [3, 4]})), "--output", str(tmp_path / "cli")]) == 0
    assert (tmp_path / "cli" / "report.json").exists()


def test_manifest_hashes_match_files(tmp_path):
    import hashlib

    out = tmp_path / "o"
    main(["run", write(tmp_path, small_sweep()), "--output", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest
    assert manifest["config_sha256"] == cli.config_hash(manifest["config"])


@pytest.mark.slow
def test_shipped_sweep_slope(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(CONFIGS / "sweep_d.json"), "--output", str(out), "--threads", "4"]) == EXIT_OK
    slope = float(read_csv(out / "sweep.csv")[0]["slope_fit"])
    assert -4.3 <= slope <= -3.7


def test_rydberg_scenario(tmp_path):
    out = tmp_path / "o"
    cfg = {
        "schema_version": 1,
        "scenario": "rydberg",
        "seed": 0,
        "experiment": {"d": 10, "N": 1},
        "exact": True,
        "n_boot": 0,
    }
    assert main(["run", write(tmp_path, cfg), "--output", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    dist = report["result"]["distances"]
    assert [d["label"] for d in dist] == ["R12", "R13", "R23"]
    assert all(d["rel_error"] < 1e-3 for d in dist)
    assert report["result"]["ordered"]


def test_learn_all_writes_shots(tmp_path):
    out = tmp_path / "o"
    cfg = {
        "schema_version": 1,
        "scenario": "learn-all",
        "seed": 1,
        "spec": {"generator": {"n": 3, "c_range": [10, 50], "a": 10}},
        "experiment": {"d": 10, "N": 100000, "T": "auto", "mode": "hybrid"},
        "n_boot": 100,
        "write_shots": True,
    }
    assert main(["run", write(tmp_path, cfg), "--output", str(out)]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    c_hat = np.array(report["result"]["learn"]["c_hat"])
    c_true = np.array(report["result"]["learn"]["c_true"])
    sd = np.sqrt(np.array(report["result"]["learn"]["var_pred"]["c"]))
    iu = np.triu_indices(3, 1)
    assert np.all(np.abs(c_hat - c_true)[iu] < 5 * sd[iu])
    assert (out / "shots.csv").read_text().count("\n") > 1


def test_decompose_check(tmp_path):
    out = tmp_path / "o"
    assert main(["run", str(CONFIGS / "decompose_check.json"), "--output", str(out)]) == EXIT_OK
    dec = json.loads((out / "report.json").read_text())["result"]["decompose"]
    assert dec["max_off_block"] <= 1e-10 and dec["max_distribution_deviation"] <= 1e-10
