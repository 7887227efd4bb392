"""
Lifting mode-space unitaries to the N-photon Fock space.

The working path applies 2x2 kernels directly to amplitude vectors. Basis
elements that agree outside the kernel's modes (i, j) and share
s = n_i + n_j form a family of s + 1 states that the kernel mixes only among
themselves, so each family is updated with an (s+1) x (s+1) block. The
permanent-based ``lift_unitary`` is the exact oracle for that path.
"""

import logging
import math
from dataclasses import dataclass
from functools import cache
from typing import Dict, Tuple

import numpy as np
from numpy.typing import NDArray

from app.definitions import PERMANENT_MAX_SIZE
from app.fock import FockBasis, FockState, enumerate_basis

_logger = logging.getLogger(__name__)

_KERNEL_TOLERANCE = 1e-12


@dataclass(frozen=True)
class TwoModeKernel:
    matrix: NDArray[np.complex128]
    modes: Tuple[int, int]

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        if matrix.shape != (2, 2):
            raise ValueError(f"kernel must be 2x2, got {matrix.shape}")
        i, j = self.modes
        if i == j:
            raise ValueError(f"kernel modes must differ, got ({i}, {j})")
        deviation = np.abs(matrix.conj().T @ matrix - np.eye(2)).max()
        if deviation > _KERNEL_TOLERANCE:
            raise ValueError(f"kernel is not unitary (deviation {deviation:.3e})")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "modes", (int(i), int(j)))


@cache
def mode_pair_families(mode_count: int, photon_number: int, i: int, j: int) -> Dict[int, NDArray[np.int64]]:
    """
    For each s, an (F, s + 1) index array: row f lists the basis indices of one
    family ordered by n_i = 0..s.
    """
    basis = enumerate_basis(mode_count, photon_number)
    occ = basis.array
    rest_modes = [m for m in range(mode_count) if m not in (i, j)]
    groups: Dict[int, Dict[tuple, list]] = {}
    for index, row in enumerate(occ):
        s = int(row[i] + row[j])
        slots = groups.setdefault(s, {}).setdefault(tuple(row[rest_modes]), [0] * (s + 1))
        slots[int(row[i])] = index
    families = {s: np.array(list(rows.values()), dtype=np.int64) for s, rows in groups.items()}
    for arr in families.values():
        arr.setflags(write=False)
    return families


@cache
def _block_terms(s: int):
    """Coefficients and exponents of the binomial expansion behind ``two_mode_block``."""
    shape = (s + 1, s + 1, s + 1)
    coef = np.zeros(shape)
    e00, e10, e01, e11 = (np.zeros(shape, dtype=np.int64) for _ in range(4))
    for k_out in range(s + 1):
        for k_in in range(s + 1):
            norm = math.sqrt(
                math.factorial(k_out) * math.factorial(s - k_out)
                / (math.factorial(k_in) * math.factorial(s - k_in))
            )
            for p in range(k_in + 1):
                q = k_out - p
                if q < 0 or q > s - k_in:
                    continue
                coef[k_out, k_in, p] = math.comb(k_in, p) * math.comb(s - k_in, q) * norm
                e00[k_out, k_in, p] = p
                e10[k_out, k_in, p] = k_in - p
                e01[k_out, k_in, p] = q
                e11[k_out, k_in, p] = s - k_in - q
    return coef, e00, e10, e01, e11


def _powers(z: complex, s: int) -> NDArray[np.complex128]:
    out = np.ones(s + 1, dtype=np.complex128)
    for k in range(1, s + 1):
        out[k] = out[k - 1] * z
    return out


def two_mode_block(u: NDArray[np.complex128], s: int) -> NDArray[np.complex128]:
    """
    Lift of a 2x2 matrix to the s-photon two-mode space, indexed by n_i.

    Entry [k', k] is <k', s-k'| U |k, s-k> with a_i^dag -> u00 a_i^dag + u10 a_j^dag
    and a_j^dag -> u01 a_i^dag + u11 a_j^dag.
    """
    coef, e00, e10, e01, e11 = _block_terms(s)
    terms = (
        coef
        * _powers(u[0, 0], s)[e00]
        * _powers(u[1, 0], s)[e10]
        * _powers(u[0, 1], s)[e01]
        * _powers(u[1, 1], s)[e11]
    )
    return terms.sum(axis=2)


def generator_block(g: NDArray[np.complex128], s: int) -> NDArray[np.complex128]:
    """Tridiagonal s-photon representation of the one-body operator sum_qp g[q,p] a_q^dag a_p."""
    k = np.arange(s + 1)
    block = np.diag(g[0, 0] * k + g[1, 1] * (s - k)).astype(np.complex128)
    if s > 0:
        # a_j^dag a_i lowers n_i, a_i^dag a_j raises it
        block[k[:-1], k[1:]] = g[1, 0] * np.sqrt(k[1:] * (s - k[1:] + 1))
        block[k[1:], k[:-1]] = g[0, 1] * np.sqrt((s - k[:-1]) * (k[:-1] + 1))
    return block


def apply_kernel_array(
    amps: NDArray[np.complex128],
    mode_count: int,
    photon_number: int,
    modes: Tuple[int, int],
    matrix: NDArray[np.complex128],
    generator: bool = False,
) -> NDArray[np.complex128]:
    """
    Apply a two-mode operator to amplitude arrays of shape (..., basis size).

    With ``generator`` the 2x2 ``matrix`` is treated as a one-body generator
    instead of a unitary.
    """
    i, j = modes
    out = np.array(amps, dtype=np.complex128, copy=True)
    for s, index in mode_pair_families(mode_count, photon_number, i, j).items():
        if s == 0 and not generator:
            continue
        block = generator_block(matrix, s) if generator else two_mode_block(matrix, s)
        out[..., index] = amps[..., index] @ block.T
    return out


def apply_two_mode(state: FockState, kernel: TwoModeKernel) -> FockState:
    i, j = kernel.modes
    for mode in (i, j):
        if not 0 <= mode < state.mode_count:
            raise IndexError(f"mode {mode} out of range for {state.mode_count} modes")
    sectors = {
        n: apply_kernel_array(vec, state.mode_count, n, (i, j), kernel.matrix)
        for n, vec in state.sectors.items()
    }
    return state.with_sectors(sectors)


def permanent(matrix: NDArray) -> complex:
    """
    Ryser's formula with Gray-code subset enumeration.

    Integer matrices are summed in integer arithmetic and give exact results.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"permanent needs a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > PERMANENT_MAX_SIZE:
        raise ValueError(f"permanent of a {n}x{n} matrix exceeds the size guard {PERMANENT_MAX_SIZE}")
    exact = np.issubdtype(a.dtype, np.integer)
    if n == 0:
        return 1 if exact else 1.0 + 0j
    a = a.astype(object if exact else np.complex128)
    row_sums = np.zeros(n, dtype=a.dtype)
    chosen = [False] * n
    size = 0
    total = 0 if exact else 0j
    for k in range(1, 1 << n):
        col = (k & -k).bit_length() - 1
        if chosen[col]:
            row_sums = row_sums - a[:, col]
            size -= 1
        else:
            row_sums = row_sums + a[:, col]
            size += 1
        chosen[col] = not chosen[col]
        term = np.prod(row_sums)
        total += term if (n - size) % 2 == 0 else -term
    return int(total) if exact else complex(total)


def lift_unitary(unitary: NDArray[np.complex128], basis: FockBasis) -> NDArray[np.complex128]:
    """Dense Fock-space matrix with <S|U|T> = Per(U[S, T]) / sqrt(prod S! prod T!)."""
    u = np.asarray(unitary, dtype=np.complex128)
    if u.shape != (basis.mode_count, basis.mode_count):
        raise ValueError(f"unitary of shape {u.shape} does not act on {basis.mode_count} modes")
    modes = [np.repeat(np.arange(basis.mode_count), occ) for occ in basis.occupations]
    norms = np.array([math.prod(math.factorial(n) for n in occ) for occ in basis.occupations], dtype=float)
    lifted = np.empty((basis.size, basis.size), dtype=np.complex128)
    for out_index, rows in enumerate(modes):
        for in_index, cols in enumerate(modes):
            lifted[out_index, in_index] = permanent(u[np.ix_(rows, cols)])
    return lifted / np.sqrt(np.outer(norms, norms))
