import csv
import json
import subprocess
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).parent.parent


def _run(args, timeout=300):
    return subprocess.run(
        [sys.executable, str(PROJECT_ROOT / "main.py"), *args],
        capture_output=True,
        text=True,
        timeout=timeout,
        cwd=PROJECT_ROOT,
    )


def _write_config(tmp_path, record, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(record))
    return str(path)


SMALL_STATE_PREP = {
    "task": "state-prep",
    "seed": 5,
    "params": {"target": "noon", "photons": 2, "modes": 2, "layers": 1},
    "train": {"iterations": 5, "log_every": 10},
}


def test_main_imports():
    process = subprocess.run(
        [sys.executable, "-c", "import main; print('Import successful')"],
        capture_output=True,
        text=True,
        timeout=120,
        cwd=PROJECT_ROOT,
    )
    assert process.returncode == 0, process.stderr
    assert "Import successful" in process.stdout


def test_list_tasks():
    process = _run(["--list-tasks"])
    assert process.returncode == 0, process.stderr
    catalog = json.loads(process.stdout)
    assert set(catalog) == {
        "state-prep",
        "channel-prep",
        "logical-cz",
        "monte-carlo",
        "routing-gate",
        "loss-correction",
        "scattering-sweep",
    }


def test_invalid_config_exits_with_code_2(tmp_path):
    out_dir = tmp_path / "out"
    config = _write_config(tmp_path, {"task": "state-prep", "bogus": 1})
    process = _run([config, "--out-dir", str(out_dir)])
    assert process.returncode == 2
    record = json.loads((out_dir / "error.json").read_text())
    assert record["success"] is False and record["exit_code"] == 2


def test_missing_config_file_exits_with_code_2(tmp_path):
    process = _run([str(tmp_path / "absent.json"), "--out-dir", str(tmp_path / "out")])
    assert process.returncode == 2


def test_state_prep_run_writes_files_and_is_deterministic(tmp_path):
    config = _write_config(tmp_path, SMALL_STATE_PREP)
    outputs = []
    for name in ("first", "second"):
        out_dir = tmp_path / name
        process = _run([config, "--out-dir", str(out_dir), "--workers", "1"])
        assert process.returncode == 0, process.stderr
        for file_name in ("summary.json", "trace.csv", "checkpoint.json"):
            assert (out_dir / file_name).exists()
        outputs.append(out_dir)

    summary = json.loads((outputs[0] / "summary.json").read_text())
    assert summary["success"] is True and summary["task"] == "state-prep"
    assert 0.0 <= summary["results"]["final_fidelity"] <= 1.0
    with open(outputs[0] / "trace.csv") as handle:
        rows = list(csv.DictReader(handle))
    assert len(rows) == 5 and rows[0]["stage"] == "state-prep"
    checkpoint = json.loads((outputs[0] / "checkpoint.json").read_text())
    assert checkpoint["network"]["M"] == 2 and checkpoint["network"]["L"] == 1

    for file_name in ("summary.json", "trace.csv", "checkpoint.json"):
        assert (outputs[0] / file_name).read_text() == (outputs[1] / file_name).read_text()


def test_seed_override_changes_the_run(tmp_path):
    config = _write_config(tmp_path, SMALL_STATE_PREP)
    for name, seed in (("a", "1"), ("b", "2")):
        assert _run([config, "--out-dir", str(tmp_path / name), "--seed", seed, "--workers", "1"]).returncode == 0
    first = json.loads((tmp_path / "a" / "checkpoint.json").read_text())
    second = json.loads((tmp_path / "b" / "checkpoint.json").read_text())
    assert first["network"]["params"] != second["network"]["params"]


def test_loss_correction_run_reports_the_shared_recovery(tmp_path):
    record = {
        "task": "loss-correction",
        "params": {"routing_layers": 1, "recovery_layers": 1},
        "train": {"iterations": 2, "log_every": 10},
        "workers": 1,
    }
    out_dir = tmp_path / "lc"
    process = _run([_write_config(tmp_path, record), "--out-dir", str(out_dir)])
    assert process.returncode == 0, process.stderr
    results = json.loads((out_dir / "summary.json").read_text())["results"]
    assert results["recovery"] == "shared"
    assert results["shared_recovery_limit"] == pytest.approx(2 / 3)
    assert results["recovery_channel_fidelity"] <= results["shared_recovery_limit"] + 1e-9
    checkpoint = json.loads((out_dir / "checkpoint.json").read_text())
    assert set(checkpoint["networks"]) == {"routing", "recovery"}
    assert checkpoint["network"] == checkpoint["networks"]["routing"]


def test_monte_carlo_without_noise(tmp_path):
    record = {
        "task": "monte-carlo",
        "params": {"target": "noon", "photons": 2, "modes": 2, "layers": 1, "sigma": 0.0, "samples": 3},
        "train": {"iterations": 3, "log_every": 10},
        "workers": 1,
    }
    out_dir = tmp_path / "mc"
    process = _run([_write_config(tmp_path, record), "--out-dir", str(out_dir)])
    assert process.returncode == 0, process.stderr
    results = json.loads((out_dir / "summary.json").read_text())["results"]
    assert results["samples"] == 3
    assert results["median_fidelity"] == pytest.approx(results["ideal_fidelity"])
    assert (out_dir / "samples.csv").exists()


def test_basis_cap_exits_with_code_4(tmp_path):
    record = {**SMALL_STATE_PREP, "params": {"target": "haar", "photons": 2, "modes": 2, "layers": 1}, "basis_cap": 1}
    out_dir = tmp_path / "capped"
    process = _run([_write_config(tmp_path, record), "--out-dir", str(out_dir)])
    assert process.returncode == 4
    assert json.loads((out_dir / "error.json").read_text())["error_type"] == "BasisSizeError"
