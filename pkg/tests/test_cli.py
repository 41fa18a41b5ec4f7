import json

import pytest

from hysid.cli import EXIT_CONFIG, EXIT_OK, main


@pytest.fixture
def config_file(tmp_path, small_config):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(small_config))
    return str(path)


def _manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


def test_simulate_writes_runs_and_manifest(tmp_path, config_file):
    out = tmp_path / "sim"
    assert main(["simulate", "--config", config_file, "--out", str(out)]) == EXIT_OK
    doc = _manifest(out)
    assert doc["command"] == "simulate"
    assert doc["files"] == [f"run_{i:02d}.csv" for i in range(10)]
    for name in doc["files"]:
        assert (out / name).exists()


def test_identify_predict_round_trip(tmp_path, config_file):
    sim = tmp_path / "sim"
    fit = tmp_path / "fit"
    prd = tmp_path / "prd"
    assert main(["simulate", "--config", config_file, "--out", str(sim)]) == EXIT_OK
    assert main(
        [
            "identify",
            "--config",
            config_file,
            "--out",
            str(fit),
            "--data",
            str(sim),
        ]
    ) == EXIT_OK
    doc = _manifest(fit)
    assert set(doc["files"]) >= {"model.json", "equations.txt", "metrics.json"}
    assert "training_fit.png" in doc["files"]
    metrics = json.loads((fit / "metrics.json").read_text())
    assert metrics["info"]["library_columns"] == 18
    assert main(
        [
            "predict",
            "--model",
            str(fit / "model.json"),
            "--data",
            str(sim / "run_09.csv"),
            "--out",
            str(prd),
        ]
    ) == EXIT_OK
    doc = _manifest(prd)
    assert set(doc["files"]) == {
        "metrics.json",
        "prediction.csv",
        "trajectory.csv",
        "trajectory.png",
    }
    header = (prd / "trajectory.csv").read_text().splitlines()[0]
    assert header == "time,true,predicted"
    report = json.loads((prd / "metrics.json").read_text())
    assert report["rmse_scaled"] < 1e-6


def test_experiment_sweep_outputs(tmp_path, config_file):
    out = tmp_path / "exp"
    assert main(
        [
            "experiment",
            "--config",
            config_file,
            "--out",
            str(out),
            "--sweep",
            "samplerate",
        ]
    ) == EXIT_OK
    doc = _manifest(out)
    tables = [f for f in doc["files"] if f.endswith("_table.csv")]
    assert tables, doc["files"]
    assert "samplerate_rmse.png" in doc["files"]
    for table in tables:
        lines = (out / table).read_text().splitlines()
        assert lines[0] == (
            "sweep_value,rmse,active_terms,missed_switches,library_columns"
        )
        assert len(lines) == 3  # two sweep points


def test_bad_config_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_section": {}}))
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == EXIT_CONFIG
    missing = tmp_path / "missing.json"
    assert (
        main(["simulate", "--config", str(missing), "--out", str(out)]) == EXIT_CONFIG
    )


def test_cli_rerun_is_bit_identical(tmp_path, config_file):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        assert main(["simulate", "--config", config_file, "--out", str(out)]) == EXIT_OK
    for name in _manifest(a)["files"] + ["manifest.json"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()
