"""
Full-size training and scattering runs. They take minutes to hours and only
run when RUN_BENCHMARKS is set.
"""

import math
import os
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.codes import binomial_code
from app.config import ScatteringSweepParams, TrainConfig
from app.definitions import SHARED_RECOVERY_LIMIT
from app.fock import enumerate_basis
from app.optimizer import StateObjective
from app.scattering import evaluate_gate, run_sweep
from app.tasks import (
    channel_task,
    make_noon_state,
    named_seed,
    run_channel_prep,
    run_logical_cz,
    run_loss_correction_demo,
    run_state_prep,
    sample_haar_state,
    single_photon_input,
    splitter_monte_carlo,
    train_correction_pipeline,
    train_cz_rails,
    train_routing_gate,
)

WORKERS = os.cpu_count() or 1


def _require_benchmarks():
    if not os.getenv("RUN_BENCHMARKS"):
        pytest.skip("RUN_BENCHMARKS not set - skipping full-size benchmark")


def _cfg(seed=0, iterations=2000):
    return TrainConfig(iterations=iterations, seed=seed, log_every=500)


def _min_loss_is_late(trace):
    cutoff = int(0.9 * len(trace))
    return int(np.argmin(trace.loss)) >= cutoff


@pytest.fixture(scope="module")
def trained_noon():
    _require_benchmarks()
    input_state = single_photon_input(4, 4)
    target = make_noon_state(4, mode_count=4)
    return input_state, target, run_state_prep(target, input_state, 3, _cfg())


def test_haar_two_photon_targets():
    _require_benchmarks()
    basis = enumerate_basis(4, 2)
    for k in range(10):
        target = sample_haar_state(basis, named_seed(k, "haar-target"))
        result = run_state_prep(target, single_photon_input(2, 4), 4, _cfg(seed=k))
        assert result.fidelity > 0.999
        assert _min_loss_is_late(result.trace)


def test_haar_four_photon_targets_mean():
    _require_benchmarks()
    basis = enumerate_basis(4, 4)
    fidelities = [
        run_state_prep(sample_haar_state(basis, named_seed(k, "haar-target")), single_photon_input(4, 4), 4, _cfg(seed=k)).fidelity
        for k in range(10)
    ]
    assert np.mean(fidelities) >= 0.97


def test_noon_state_preparation(trained_noon):
    _, _, result = trained_noon
    assert result.fidelity > 0.999


def test_binomial_encoding_and_logical_gates():
    _require_benchmarks()
    code = binomial_code(3)
    for gate in ("encode", "H", "S", "T"):
        code_in, target, code_out = channel_task(code, gate)
        result = run_channel_prep(code_in, target, 4, _cfg(), code_out)
        assert result.fidelity > 0.9999, gate


def test_logical_cz():
    _require_benchmarks()
    code = binomial_code(2)
    encoder, decoder = train_cz_rails(code, 5, 5, _cfg())
    assert run_logical_cz(code, encoder.params, decoder.params).fidelity > 0.9999


def test_splitter_noise_degrades_noon_network(trained_noon):
    input_state, target, result = trained_noon
    objective = StateObjective(input_state, target)
    medians = {
        sigma: splitter_monte_carlo(result.params, objective, sigma, 1000, seed=1, workers=WORKERS).median
        for sigma in (0.001, 0.01, 0.02)
    }
    assert medians[0.02] < 0.99
    ratio = (1.0 - medians[0.01]) / (1.0 - medians[0.001])
    assert 30.0 <= ratio <= 300.0


def test_routing_gate_depth():
    _require_benchmarks()
    deep = train_routing_gate(4, 5, _cfg())
    assert min(deep.sector_fidelities) > 0.99
    shallow = train_routing_gate(4, 1, _cfg())
    assert min(shallow.sector_fidelities) < 0.99


def test_shared_recovery_reaches_its_limit():
    """
    One recovery for both loss locations. The channel fidelity stops at 2/3,
    yet |+~> is insensitive to the swapped logical labels and is restored.
    """
    _require_benchmarks()
    training = train_correction_pipeline(binomial_code(2), 5, 3, _cfg())
    assert training.recovery_channel_fidelity == pytest.approx(SHARED_RECOVERY_LIMIT, abs=0.005)
    assert training.recovery_channel_fidelity <= SHARED_RECOVERY_LIMIT + 1e-9
    report = run_loss_correction_demo(training.pipeline, 1 / math.sqrt(2), 1 / math.sqrt(2))
    assert report.no_loss_fidelity == pytest.approx(1.0)
    for mode, entry in report.per_location.items():
        assert entry["action"] == "route", mode
        assert entry["fidelity"] >= 0.98, mode


def test_heralded_recovery_restores_any_logical_state():
    _require_benchmarks()
    training = train_correction_pipeline(binomial_code(2), 5, 3, _cfg(), location_heralded=True)
    assert min(training.recovery_fidelities.values()) > 0.99
    report = run_loss_correction_demo(training.pipeline, 0.6, 0.8)
    for mode, entry in report.per_location.items():
        assert entry["fidelity"] >= 0.98, mode


def test_narrow_pulses_at_opposite_phases():
    """
    sigma/g = 0.1, kappa = g. With the cavity eliminated the worst phase pair
    measures F = 0.976 on the default grid, short of the 0.999 a model that
    keeps the cavity field is expected to reach.
    """
    _require_benchmarks()
    rows = run_sweep(ScatteringSweepParams(sigma_over_g=[0.1], phi1=[math.pi], richardson=False), workers=1)
    assert rows[0]["fidelity"] == pytest.approx(0.976, abs=0.01)


def test_wide_pulse_at_opposite_phases():
    """
    sigma/g = 1, kappa = g, |phi1 - phi2| = pi. The cavity-eliminated atom
    gives F = 0.80 with a step-halving change near 1e-4; a cavity-retaining
    model drops further, towards 0.55.
    """
    _require_benchmarks()
    evaluation = evaluate_gate(1.0, 1.0, math.pi, 0.0)
    assert evaluation.fidelity == pytest.approx(0.80, abs=0.02), evaluation
    assert evaluation.richardson_delta < 5e-3


def test_fidelity_falls_with_pulse_width():
    _require_benchmarks()
    rows = run_sweep(
        ScatteringSweepParams(sigma_over_g=[0.2, 0.5, 1.0], phi1=[math.pi], richardson=False), workers=WORKERS
    )
    values = [row["fidelity"] for row in rows]
    assert values == sorted(values, reverse=True)
