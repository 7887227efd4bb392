"""Two-mode binomial code and logical gate targets."""

import math
from dataclasses import dataclass
from typing import List

import numpy as np
from numpy.typing import NDArray

from app.fock import FockState, superpose

_SQRT_HALF = 1.0 / math.sqrt(2.0)

LOGICAL_GATES = {
    "identity": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Z": np.diag([1.0, -1.0]).astype(np.complex128),
    "H": _SQRT_HALF * np.array([[1, 1], [1, -1]], dtype=np.complex128),
    "S": np.diag([1.0, 1j]),
    "T": np.diag([1.0, np.exp(1j * np.pi / 4)]),
    "CZ": np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128),
}


@dataclass(frozen=True)
class CodeSpec:
    """Logical basis of a (2N - 1)-photon code on two modes."""

    order: int
    zero: FockState
    one: FockState

    @property
    def photon_number(self) -> int:
        return 2 * self.order - 1

    @property
    def logical(self) -> List[FockState]:
        return [self.zero, self.one]

    def encode(self, alpha: complex, beta: complex) -> FockState:
        """Normalized alpha |0~> + beta |1~>."""
        return superpose(self.logical, [alpha, beta], normalize=True)

    def fock_inputs(self) -> List[FockState]:
        """|2N-1, 0> and |0, 2N-1>, the unencoded states the encoder maps onto |0~>, |1~>."""
        n = self.photon_number
        return [FockState.basis_state((n, 0)), FockState.basis_state((0, n))]

    def rail_states(self) -> List[FockState]:
        """|2N-1, 0> and |2N-2, 1>: the logical states with at most one photon on the second rail."""
        n = self.photon_number
        return [FockState.basis_state((n, 0)), FockState.basis_state((n - 1, 1))]


def binomial_code(order: int) -> CodeSpec:
    """
    |0~> = 2^-(N-1) sum_j sqrt(C(2N-1, 2j))   |2j, 2N-1-2j>
    |1~> = 2^-(N-1) sum_j sqrt(C(2N-1, 2j+1)) |2j+1, 2N-2-2j>
    """
    if order < 2:
        raise ValueError(f"binomial code order must be at least 2, got {order}")
    n = 2 * order - 1
    scale = 2.0 ** -(order - 1)
    zero = {(2 * j, n - 2 * j): math.sqrt(math.comb(n, 2 * j)) * scale for j in range(order)}
    one = {(2 * j + 1, n - 2 * j - 1): math.sqrt(math.comb(n, 2 * j + 1)) * scale for j in range(order)}
    return CodeSpec(order, FockState.from_amplitudes(2, zero), FockState.from_amplitudes(2, one))


def logical_gate_target(gate: str) -> NDArray[np.complex128]:
    if gate not in LOGICAL_GATES:
        raise ValueError(f"unknown gate {gate!r}; expected one of {sorted(LOGICAL_GATES)}")
    return LOGICAL_GATES[gate].copy()
