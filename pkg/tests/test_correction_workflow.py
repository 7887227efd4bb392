import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.codes import binomial_code
from app.correction_workflow import (
    NO_LOSS,
    ROUTE,
    UNCORRECTABLE,
    CorrectionPipeline,
    register_state,
    run_branch,
    syndrome_action,
)
from app.fock import FockState, inner_product
from app.network import NetworkParams
from app.tasks import routed_error_basis, run_loss_correction_demo


def _identity_pipeline(order=2):
    identity = NetworkParams.identity(2, 1)
    return CorrectionPipeline(binomial_code(order), identity, identity)


def test_syndrome_table():
    code = binomial_code(2)
    assert syndrome_action(3, code) == NO_LOSS
    assert syndrome_action(6, code) == NO_LOSS
    assert syndrome_action(2, code) == ROUTE
    assert syndrome_action(5, code) == ROUTE
    assert syndrome_action(1, code) == UNCORRECTABLE
    assert syndrome_action(0, code) == UNCORRECTABLE


def test_register_layout():
    register = register_state(FockState.basis_state((2, 1)))
    assert register.amplitude((1, 2, 1)) == pytest.approx(1.0)
    assert register_state(FockState.basis_state((2, 1)), 0).amplitude((0, 2, 1)) == pytest.approx(1.0)


def test_no_loss_branch_scores_directly():
    pipeline = _identity_pipeline()
    logical = pipeline.code.encode(1.0, 1.0)
    result = run_branch(pipeline, logical, None)
    assert result["action"] == NO_LOSS
    assert result["syndrome"] == 3
    assert result["branch_weight"] == 1.0
    assert result["fidelity"] == pytest.approx(1.0)


def test_loss_branch_is_routed():
    pipeline = _identity_pipeline()
    logical = pipeline.code.encode(1.0, 1.0)
    result = run_branch(pipeline, logical, 0)
    assert result["action"] == ROUTE
    assert result["syndrome"] == 2
    assert result["branch_weight"] == pytest.approx(1.5)
    # identity routing leaves the ancilla photon where it was
    assert result["fidelity"] == pytest.approx(0.0, abs=1e-12)


def test_uncorrectable_syndrome_ends_the_workflow():
    pipeline = _identity_pipeline(order=3)
    result = run_branch(pipeline, FockState.basis_state((1, 1)), None)
    assert result["syndrome"] == 2
    assert result["action"] == UNCORRECTABLE
    assert result["fidelity"] is None


def test_missing_recovery_network():
    pipeline = CorrectionPipeline(binomial_code(2), NetworkParams.identity(2, 1))
    with pytest.raises(KeyError):
        pipeline.recovery_for()
    with pytest.raises(KeyError):
        pipeline.recovery_for(1)
    pipeline.recovery = NetworkParams.identity(2, 1)
    assert pipeline.recovery_for() is pipeline.recovery


def test_recovery_ignores_the_loss_location_unless_heralded():
    code = binomial_code(2)
    shifted = NetworkParams.identity(2, 1)
    shifted.meshes[0].output_phases[0] = math.pi / 2
    pipeline = CorrectionPipeline(code, NetworkParams.identity(2, 1), NetworkParams.identity(2, 1), heralded={1: shifted})
    logical = code.encode(1.0, 0.0)
    shared = run_branch(pipeline, logical, 1)

    pipeline.location_heralded = True
    heralded = run_branch(pipeline, logical, 1)
    assert heralded["action"] == shared["action"] == ROUTE
    # the loss leaves |0,2> + |2,0>, which the shifted phase makes orthogonal
    assert abs(inner_product(heralded["state"], shared["state"])) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(KeyError):
        run_branch(pipeline, logical, 0)


def test_single_loss_error_states_swap_logical_labels():
    # a shared recovery sees the same two states with |0~> and |1~> exchanged
    for order in (2, 3):
        code = binomial_code(order)
        routing = NetworkParams.identity(2, 1)
        first = routed_error_basis(code, routing, loss_mode=0)
        second = routed_error_basis(code, routing, loss_mode=1)
        assert abs(inner_product(first[0], second[1])) == pytest.approx(1.0)
        assert abs(inner_product(first[1], second[0])) == pytest.approx(1.0)
        assert abs(inner_product(first[0], first[1])) == pytest.approx(0.0, abs=1e-12)


def test_routed_error_basis_shape():
    code = binomial_code(2)
    routed = routed_error_basis(code, NetworkParams.identity(2, 1), loss_mode=1)
    assert len(routed) == 2
    # one ancilla photon plus 2N - 2 code photons
    assert all(state.photon_numbers == (3,) and state.mode_count == 3 for state in routed)


def test_demo_report():
    report = run_loss_correction_demo(_identity_pipeline(), 1.0, 0.0)
    assert report.no_loss_fidelity == pytest.approx(1.0)
    assert set(report.per_location) == {0, 1}
    record = report.to_dict()
    assert set(record["per_location"]) == {"0", "1"}
    assert record["per_location"]["1"]["action"] == ROUTE
    assert np.isfinite(record["mean_fidelity"])
