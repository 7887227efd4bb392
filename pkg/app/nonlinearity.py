"""
Photon-number-selective phase activation.

A single-atom gate on one mode imprints phi1 + (n - 1) phi2 on an n-photon
component (n >= 1) and nothing on the vacuum. A cascade of K subtraction
stages generalizes this to an arbitrary phase on each of the first K photon
numbers and a linear continuation beyond.
"""

from typing import NamedTuple, Sequence, Union

import numpy as np
from numpy.typing import NDArray

from app.fock import FockState


class NonlinearParams(NamedTuple):
    phi1: float
    phi2: float


class MultiAtomPhases(NamedTuple):
    subtraction_count: int
    phases: tuple

    @classmethod
    def from_single(cls, params: NonlinearParams) -> "MultiAtomPhases":
        return cls(1, (float(params.phi1), float(params.phi2)))

    def validate(self) -> None:
        if self.subtraction_count < 1:
            raise ValueError(f"subtraction_count must be at least 1, got {self.subtraction_count}")
        if len(self.phases) != self.subtraction_count + 1:
            raise ValueError(
                f"{self.subtraction_count} subtractions need {self.subtraction_count + 1} phases, "
                f"got {len(self.phases)}"
            )


Activation = Union[NonlinearParams, MultiAtomPhases]


def nl_phase(n, params: NonlinearParams):
    """Phase on an n-photon component; ``n`` may be an integer array."""
    n = np.asarray(n)
    phase = np.where(n > 0, params.phi1 + (n - 1) * params.phi2, 0.0)
    return float(phase) if phase.ndim == 0 else phase


def nl_phase_multi(n, params: MultiAtomPhases):
    params.validate()
    k = params.subtraction_count
    n = np.asarray(n)
    cumulative = np.concatenate(([0.0], np.cumsum(params.phases[:k])))
    phase = cumulative[np.minimum(n, k)] + np.maximum(0, n - k) * params.phases[k]
    return float(phase) if phase.ndim == 0 else phase


def _mode_phase(n, params: Activation):
    if isinstance(params, MultiAtomPhases):
        return nl_phase_multi(n, params)
    return nl_phase(n, params)


def layer_phases(occupations: NDArray[np.int64], params: Sequence[Activation]) -> NDArray[np.float64]:
    """Total phase sum_m nl(n_m) for each row of an occupation array."""
    if occupations.shape[1] != len(params):
        raise ValueError(f"{len(params)} activation parameters for {occupations.shape[1]} modes")
    total = np.zeros(occupations.shape[0])
    for mode, p in enumerate(params):
        total += _mode_phase(occupations[:, mode], p)
    return total


def apply_nonlinear_layer(state: FockState, params: Sequence[Activation]) -> FockState:
    if len(params) != state.mode_count:
        raise ValueError(f"{len(params)} activation parameters for {state.mode_count} modes")
    sectors = {
        n: vec * np.exp(1j * layer_phases(state.basis(n).array, params))
        for n, vec in state.sectors.items()
    }
    return state.with_sectors(sectors)
