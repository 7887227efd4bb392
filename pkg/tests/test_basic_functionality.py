import json
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))


def test_package_imports():
    """Every module of the package imports without optional services."""
    try:
        import app.artifacts  # noqa: F401
        import app.correction_workflow  # noqa: F401
        import app.network_model  # noqa: F401
        import app.scattering  # noqa: F401
        import app.tasks  # noqa: F401
        from app.definitions import EXPERIMENT_NAME, MODEL_ALIAS, REGISTERED_MODEL_NAME
    except ImportError as e:
        pytest.fail(f"Cannot import the package: {e}")
    assert EXPERIMENT_NAME and MODEL_ALIAS and REGISTERED_MODEL_NAME


def test_project_structure():
    """Test that all required files and directories exist."""
    project_root = Path(__file__).parent.parent

    required_files = [
        'main.py',
        'register_model.py',
        'requirements.txt',
        'README.md',
        'app/__init__.py',
        'app/definitions.py',
        'app/fock.py',
        'app/interferometer.py',
        'app/focklift.py',
        'app/nonlinearity.py',
        'app/network.py',
        'app/optimizer.py',
        'app/tasks.py',
        'app/scattering.py',
        'data/configs/state_prep.json',
        'data/configs/scattering_sweep.json',
    ]

    for file_path in required_files:
        full_path = project_root / file_path
        assert full_path.exists(), f"Required file missing: {file_path}"


def test_shipped_configs_validate():
    from app.config import ExperimentConfig

    configs = sorted((Path(__file__).parent.parent / "data" / "configs").glob("*.json"))
    assert len(configs) == 7
    tasks = set()
    for path in configs:
        config = ExperimentConfig.model_validate(json.loads(path.read_text()))
        tasks.add(config.task)
    assert len(tasks) == 7


def test_artifact_writers(tmp_path):
    import numpy as np

    from app.artifacts import write_csv, write_json

    result = write_json(tmp_path / "record.json", {"b": np.float64(0.5), "a": [1j], "bad": math.nan})
    assert result["success"]
    record = json.loads((tmp_path / "record.json").read_text())
    assert record == {"a": [[0.0, 1.0]], "b": 0.5, "bad": "nan"}

    result = write_csv(tmp_path / "rows.csv", [{"x": 0.1, "y": ""}], ["x", "y"])
    assert result["success"]
    assert (tmp_path / "rows.csv").read_text() == "x,y\n0.1,\n"

    failed = write_json(tmp_path / "missing" / "record.json", {})
    assert failed["success"] is False and "error" in failed


def test_checkpoint_loading_picks_primary_network(tmp_path):
    from app.artifacts import load_checkpoint, save_checkpoint
    from app.network import NetworkParams

    routing = NetworkParams.random(2, 1, seed=0)
    recovery = NetworkParams.random(2, 2, seed=1)
    path = tmp_path / "run.json"
    assert save_checkpoint(path, {"routing": routing, "recovery": recovery})["success"] is True
    record = json.loads(path.read_text())
    assert set(record["networks"]) == {"routing", "recovery"}
    assert load_checkpoint(str(path)).layer_count == 1
    assert np.allclose(load_checkpoint(str(path), "recovery").flatten(), recovery.flatten())
    with pytest.raises(KeyError):
        load_checkpoint(str(path), "decoder")
    with pytest.raises(ValueError):
        save_checkpoint(tmp_path / "empty.json", {})

    single = NetworkParams.random(3, 1, seed=2)
    (tmp_path / "single.json").write_text(json.dumps(single.to_checkpoint()))
    assert load_checkpoint(str(tmp_path / "single.json")).mode_count == 3


def test_pyfunc_model_predicts_fock_records():
    from app.fock import FockState, inner_product
    from app.network import NetworkParams, forward
    from app.network_model import PhotonicNetwork

    params = NetworkParams.random(2, 2, seed=3)
    model = PhotonicNetwork(params.to_checkpoint())
    state = FockState.basis_state((1, 1))
    (output,) = model.predict(None, [state.to_dict()])
    assert abs(inner_product(FockState.from_dict(output), forward(state, params))) == pytest.approx(1.0)

    with pytest.raises(ValueError):
        model.predict(None, [FockState.basis_state((1, 0, 0)).to_dict()])
    with pytest.raises(RuntimeError):
        PhotonicNetwork().predict(None, [state.to_dict()])
