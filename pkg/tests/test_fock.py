import math
import pickle
import sys
from pathlib import Path

import numpy as np
import pytest

# Add the project root to the Python path
sys.path.insert(0, str(Path(__file__).parent.parent))

from app.errors import BasisSizeError
from app.fock import (
    FockState,
    apply_loss,
    check_basis_size,
    enumerate_basis,
    inner_product,
    permute_modes,
    superpose,
    tensor_product,
    total_photon_number,
)


def test_basis_sizes_and_order():
    vacuum = enumerate_basis(2, 0)
    assert vacuum.size == 1 and vacuum.occupations == ((0, 0),)
    assert enumerate_basis(4, 4).size == 35
    five = enumerate_basis(2, 5)
    assert five.size == 6
    assert five.occupations[0] == (5, 0) and five.occupations[-1] == (0, 5)
    for k, occ in enumerate(five.occupations):
        assert five.index(occ) == k


def test_basis_index_rejects_foreign_occupation():
    with pytest.raises(KeyError):
        enumerate_basis(2, 2).index((1, 0))


def test_basis_cap_trips_before_allocation():
    assert check_basis_size(4, 4, cap=35) == 35
    with pytest.raises(BasisSizeError) as info:
        check_basis_size(6, 6, cap=100)
    assert info.value.size == math.comb(11, 5)


def test_inner_product_examples():
    one_zero = FockState.basis_state((1, 0))
    zero_one = FockState.basis_state((0, 1))
    assert inner_product(one_zero, one_zero) == pytest.approx(1.0)
    assert inner_product(one_zero, zero_one) == pytest.approx(0.0)
    noon = FockState.from_amplitudes(2, {(2, 0): 1.0, (0, 2): 1.0})
    assert inner_product(noon, FockState.basis_state((2, 0))) == pytest.approx(1 / math.sqrt(2))


def test_inner_product_is_conjugate_linear_in_first_argument():
    state = FockState.basis_state((1, 1))
    assert inner_product(state.scaled(1j), state) == pytest.approx(-1j)


def test_normalized_flag_is_checked():
    with pytest.raises(ValueError):
        FockState(2, {1: np.array([1.0, 1.0])})
    loose = FockState.from_sectors(2, {1: np.array([1.0, 1.0])}, normalize=False)
    assert not loose.normalized and loose.weight == pytest.approx(2.0)


def test_sector_length_must_match_basis():
    with pytest.raises(ValueError):
        FockState(2, {2: np.array([1.0, 0.0])})


def test_apply_loss_examples():
    state, weight = apply_loss(FockState.basis_state((1, 0)), 0)
    assert weight == pytest.approx(1.0)
    assert state.amplitude((0, 0)) == pytest.approx(1.0)

    _, weight = apply_loss(FockState.basis_state((2, 0)), 1)
    assert weight == 0.0

    with pytest.raises(IndexError):
        apply_loss(FockState.basis_state((1, 0)), 2)


def test_apply_loss_on_code_state_by_hand():
    # (|0,3> + sqrt(3)|2,1>)/2 loses a photon from mode 0: only |2,1> -> sqrt(2)|1,1>
    state = FockState.from_amplitudes(2, {(0, 3): 0.5, (2, 1): math.sqrt(3) / 2})
    lost, weight = apply_loss(state, 0)
    assert weight == pytest.approx(3 / 4 * 2)
    assert abs(lost.amplitude((1, 1))) == pytest.approx(1.0)
    assert total_photon_number(lost) == {2: pytest.approx(1.0)}


def test_total_photon_number():
    assert total_photon_number(FockState.basis_state((2, 1))) == {3: pytest.approx(1.0)}
    assert total_photon_number(FockState.vacuum(3)) == {0: pytest.approx(1.0)}
    mixed = FockState.from_amplitudes(2, {(1, 0): 1.0, (2, 0): 1.0})
    assert total_photon_number(mixed) == {1: pytest.approx(0.5), 2: pytest.approx(0.5)}
    assert total_photon_number(FockState.basis_state((2, 1)), modes=[1]) == {1: pytest.approx(1.0)}


def test_superpose_and_normalize():
    states = [FockState.basis_state((1, 0)), FockState.basis_state((0, 1))]
    plus = superpose(states, [1.0, 1.0], normalize=True)
    assert plus.is_normalized()
    assert plus.amplitude((1, 0)) == pytest.approx(1 / math.sqrt(2))


def test_tensor_product_and_permutation():
    joined = tensor_product(FockState.basis_state((1,)), FockState.basis_state((0, 1)))
    assert joined.mode_count == 3
    assert joined.amplitude((1, 0, 1)) == pytest.approx(1.0)

    # new mode k carries old mode order[k]
    moved = permute_modes(FockState.basis_state((2, 0, 1)), (2, 0, 1))
    assert moved.amplitude((1, 2, 0)) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        permute_modes(joined, (0, 0, 1))


def test_dict_record_restores_multi_sector_state():
    state = FockState.from_amplitudes(2, {(1, 0): 0.6, (1, 1): 0.8j})
    restored = FockState.from_dict(state.to_dict())
    assert restored.photon_numbers == (1, 2)
    assert inner_product(state, restored) == pytest.approx(1.0)


def test_states_pickle_for_worker_processes():
    state = FockState.from_amplitudes(3, {(1, 1, 0): 1.0, (0, 0, 2): 1j})
    clone = pickle.loads(pickle.dumps(state))
    assert inner_product(state, clone) == pytest.approx(1.0)
    assert pickle.loads(pickle.dumps(enumerate_basis(3, 2))) is enumerate_basis(3, 2)
