import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.fock import FockState
from app.nonlinearity import (
    MultiAtomPhases,
    NonlinearParams,
    apply_nonlinear_layer,
    layer_phases,
    nl_phase,
    nl_phase_multi,
)


def test_single_atom_phase():
    params = NonlinearParams(0.7, 0.2)
    assert nl_phase(0, params) == 0.0
    assert nl_phase(1, params) == pytest.approx(0.7)
    assert nl_phase(3, params) == pytest.approx(1.1)
    assert np.allclose(nl_phase(np.array([0, 1, 2]), params), [0.0, 0.7, 0.9])


def test_cascade_phases():
    a, b, c = 0.3, 0.5, 0.11
    cascade = MultiAtomPhases(2, (a, b, c))
    assert nl_phase_multi(0, cascade) == 0.0
    assert nl_phase_multi(1, cascade) == pytest.approx(a)
    assert nl_phase_multi(2, cascade) == pytest.approx(a + b)
    assert nl_phase_multi(3, cascade) == pytest.approx(a + b + c)
    assert nl_phase_multi(5, cascade) == pytest.approx(a + b + 3 * c)


def test_one_stage_cascade_reduces_to_single_atom():
    params = NonlinearParams(1.3, -0.4)
    n = np.arange(6)
    assert np.allclose(nl_phase_multi(n, MultiAtomPhases.from_single(params)), nl_phase(n, params))


def test_cascade_validation():
    with pytest.raises(ValueError):
        nl_phase_multi(1, MultiAtomPhases(2, (0.1, 0.2)))
    with pytest.raises(ValueError):
        nl_phase_multi(1, MultiAtomPhases(0, (0.1,)))


def test_layer_phase_sums_over_modes():
    occupations = np.array([[2, 1], [0, 3]])
    params = [NonlinearParams(0.1, 1.0), NonlinearParams(0.5, 0.0)]
    assert np.allclose(layer_phases(occupations, params), [1.1 + 0.5, 0.5])
    with pytest.raises(ValueError):
        layer_phases(occupations, params[:1])


def test_layer_acts_diagonally():
    state = FockState.from_amplitudes(2, {(2, 0): 1.0, (1, 1): 1.0})
    out = apply_nonlinear_layer(state, [NonlinearParams(np.pi, np.pi / 2), NonlinearParams(0.0, 0.0)])
    # n=2 on mode 0 picks up 3 pi / 2, n=1 picks up pi
    assert out.amplitude((2, 0)) == pytest.approx(-1j / np.sqrt(2))
    assert out.amplitude((1, 1)) == pytest.approx(-1 / np.sqrt(2))
    assert out.is_normalized()
