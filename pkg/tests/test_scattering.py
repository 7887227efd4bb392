import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.config import ScatteringSweepParams
from app.errors import GridResolutionError
from app.scattering import (
    SWEEP_COLUMNS,
    AtomParams,
    PulseSpec,
    ScatteredPair,
    TwoPhotonAmplitude,
    add_photon,
    evaluate_gate,
    gate_fidelity,
    gate_response,
    phase_and_time_reverse,
    run_sweep,
    subtract_one_photon,
    subtract_two_photon,
)

ATOM = AtomParams(g=1.0, kappa=1.0)


@pytest.fixture(scope="module")
def wide_pulse_response():
    return gate_response(PulseSpec.for_atom(1.0, ATOM), ATOM)


def _ordered_overlap(pair: ScatteredPair) -> float:
    """Overlap of the split part with -sqrt(2) xi(t_a) xi(t_b), b photon first."""
    xi = pair.pulse.envelope()
    ideal = -math.sqrt(2.0) * np.tril(np.outer(xi, xi), k=-1)
    reference = TwoPhotonAmplitude(ideal, pair.pulse.step, symmetric=False)
    return abs(reference.overlap(pair.mode_ab)) / math.sqrt(reference.norm_squared())


def test_atom_rates():
    assert ATOM.gamma == pytest.approx(2.0)
    assert AtomParams(g=1.0, kappa=0.5).gamma == pytest.approx(4.0)
    with pytest.raises(ValueError):
        AtomParams(g=1.0, kappa=0.0)


def test_default_grid():
    pulse = PulseSpec.for_atom(1.0, ATOM)
    assert pulse.step == pytest.approx(0.05)
    assert pulse.size == 645
    assert pulse.is_symmetric()
    xi = pulse.envelope()
    assert pulse.step * np.sum(xi**2) == pytest.approx(1.0, abs=1e-8)
    assert np.allclose(xi, xi[::-1])
    with pytest.raises(ValueError):
        PulseSpec.for_atom(0.0, ATOM)


def test_grid_resolution_guards():
    with pytest.raises(GridResolutionError) as info:
        PulseSpec.for_atom(1.0, ATOM, step=0.2)
    assert info.value.quantity == "1/Gamma"
    with pytest.raises(GridResolutionError) as info:
        PulseSpec.for_atom(1.0, AtomParams(g=1.0, kappa=4.0), step=0.05)
    assert info.value.quantity == "1/kappa"
    with pytest.raises(GridResolutionError):
        PulseSpec(sigma=1.0, step=0.05, half_points=10).check_resolution(ATOM)


def test_two_photon_amplitude_storage():
    with pytest.raises(ValueError):
        TwoPhotonAmplitude(np.zeros((2, 3)), 0.1, symmetric=False)
    with pytest.raises(ValueError):
        TwoPhotonAmplitude(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.1, symmetric=True)

    pulse = PulseSpec(sigma=1.0, step=0.1, half_points=40)
    product = TwoPhotonAmplitude.product(pulse.envelope(), pulse.step)
    assert product.norm_squared() == pytest.approx(1.0)
    assert product.overlap(product.scaled(1j)) == pytest.approx(1j)
    assert np.allclose(product.grid(), product.grid().T)


def test_phase_and_reverse_is_an_involution():
    pulse = PulseSpec(sigma=1.0, step=0.1, half_points=4)
    rng = np.random.default_rng(0)
    raw = rng.normal(size=(9, 9)) + 1j * rng.normal(size=(9, 9))
    pair = ScatteredPair(
        pulse,
        TwoPhotonAmplitude(raw + raw.T, pulse.step, symmetric=True),
        TwoPhotonAmplitude(raw, pulse.step, symmetric=False),
    )
    twice = phase_and_time_reverse(phase_and_time_reverse(pair, 0.7, -1.9), 0.7, -1.9)
    assert np.allclose(twice.mode_a.grid(), pair.mode_a.grid(), atol=1e-14)
    assert np.allclose(twice.mode_ab.grid(), pair.mode_ab.grid(), atol=1e-14)

    shifted = PulseSpec(sigma=1.0, step=0.1, half_points=4, center=0.3)
    with pytest.raises(ValueError):
        phase_and_time_reverse(ScatteredPair(shifted, pair.mode_a, pair.mode_ab), 0.0, 0.0)


def test_narrow_single_photon_is_subtracted():
    # sigma / Gamma = 0.01
    pulse = PulseSpec.for_atom(0.02, ATOM)
    result = subtract_one_photon(pulse, ATOM)
    assert result.subtraction_overlap() > 0.999
    budget = result.norm_budget()
    assert budget["total"] == pytest.approx(1.0, abs=1e-9)
    assert budget["transmitted"] < 1e-3


def test_wide_single_photon_keeps_norm():
    budget = subtract_one_photon(PulseSpec.for_atom(1.0, ATOM), ATOM).norm_budget()
    assert budget["total"] == pytest.approx(1.0, abs=1e-9)
    assert budget["residual"] < 1e-8


def test_two_photon_subtraction_orders_the_photons():
    narrow = subtract_two_photon(PulseSpec.for_atom(0.4, ATOM), ATOM)
    wide = subtract_two_photon(PulseSpec.for_atom(1.0, ATOM), ATOM)
    assert _ordered_overlap(narrow) > 0.9
    assert _ordered_overlap(narrow) > _ordered_overlap(wide)
    assert wide.norm_budget()["total"] == pytest.approx(1.0, abs=1e-9)


def test_two_photon_budget_closes_on_coarse_grids():
    # Gamma * step = 0.1 and kappa * step = 0.05, the coarsest the guards allow
    slow = AtomParams(g=0.5, kappa=0.5)
    pulse = PulseSpec(sigma=1.0, step=0.1, half_points=120)
    budget = subtract_two_photon(pulse, slow).norm_budget()
    assert budget["total"] == pytest.approx(1.0, abs=1e-9)
    assert budget["mode_a"] > 0.0 and budget["mode_ab"] > 0.0


def test_add_photon_keeps_norm_for_any_input():
    pulse = PulseSpec(sigma=2.0, step=0.1, half_points=60)
    rng = np.random.default_rng(5)
    n = pulse.size
    raw = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    pair = ScatteredPair(
        pulse,
        TwoPhotonAmplitude(raw + raw.T, pulse.step, symmetric=True),
        TwoPhotonAmplitude(raw, pulse.step, symmetric=False),
    )
    before = pair.mode_a.norm_squared() + pair.mode_ab.norm_squared()
    budget = add_photon(pair, AtomParams(g=0.5, kappa=0.5)).norm_budget()
    assert budget["total"] == pytest.approx(before, rel=1e-10)


def test_equal_phases_restore_the_pulse(wide_pulse_response):
    for phi in (0.0, 1.0, math.pi):
        assert wide_pulse_response.fidelity(phi, phi) > 0.999


def test_fidelity_symmetries(wide_pulse_response):
    for delta in (0.4, 1.3, 2.5):
        assert wide_pulse_response.fidelity(delta, 0.0) == pytest.approx(
            wide_pulse_response.fidelity(-delta, 0.0), abs=1e-12
        )
        assert wide_pulse_response.fidelity(delta + 0.8, 0.8) == pytest.approx(
            wide_pulse_response.fidelity(delta, 0.0), abs=1e-12
        )


def test_direct_composition_matches_linear_response(wide_pulse_response):
    for phi1, phi2 in ((math.pi, 0.0), (0.9, 0.2)):
        assert gate_fidelity(1.0, 1.0, phi1, phi2) == pytest.approx(
            wide_pulse_response.fidelity(phi1, phi2), abs=1e-10
        )


def test_sweep_minimum_sits_at_opposite_phases():
    rows = run_sweep(ScatteringSweepParams(richardson=False))
    assert len(rows) == 12
    assert all(list(row) == SWEEP_COLUMNS for row in rows)
    assert all(row["richardson_delta"] == "" for row in rows)
    worst = min(rows, key=lambda row: row["fidelity"])
    assert worst["phi1"] == pytest.approx(math.pi)
    assert worst["fidelity"] < rows[0]["fidelity"]


def test_evaluate_gate_reports_finer_solve():
    checked = evaluate_gate(1.0, 1.0, 0.0, 0.0)
    assert checked.grid_step == pytest.approx(0.025)
    assert checked.richardson_delta is not None and checked.richardson_delta < 1e-3
    unchecked = evaluate_gate(1.0, 1.0, 0.0, 0.0, richardson=False)
    assert unchecked.richardson_delta is None and unchecked.grid_step == pytest.approx(0.05)
