"""
Mode-space linear optics: MZI transfer matrices, the rectangular mesh, its
decomposition, splitter-error injection and Haar sampling.

An MZI acting on modes (m, m+1) has transfer matrix

    T(theta, phi) = i e^{i theta/2} [[e^{i phi} sin(theta/2),  cos(theta/2)],
                                     [e^{i phi} cos(theta/2), -sin(theta/2)]]

and a mesh realizes U = D T_K ... T_1 with the T_k taken in layout order.
"""

import logging
import math
from dataclasses import dataclass
from functools import cache
from typing import List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.typing import NDArray

from app.definitions import UNITARY_TOLERANCE

_logger = logging.getLogger(__name__)

TWO_PI = 2.0 * np.pi
SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


class MziParams(NamedTuple):
    theta: float
    phi: float


class SplitterError(NamedTuple):
    """Deviations of the two internal beam splitters from 50:50."""

    alpha: float = 0.0
    beta: float = 0.0


def _beam_splitter(angle: float) -> NDArray[np.complex128]:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=np.complex128)


def _phase_shifter(angle: float) -> NDArray[np.complex128]:
    return np.array([[np.exp(1j * angle), 0.0], [0.0, 1.0]], dtype=np.complex128)


def mzi_transfer(params: MziParams, error: Optional[SplitterError] = None) -> NDArray[np.complex128]:
    """
    2x2 transfer matrix of one MZI.

    Without error (or with alpha = beta = 0) the closed form is returned, so an
    error-free faulty mesh matches the ideal mesh bit for bit. With error the
    matrix is BS(pi/4 + beta) PS(theta) BS(pi/4 + alpha) PS(phi); at zero
    error that product equals the closed form with global phase 1.
    """
    theta, phi = params
    if error is None or (error.alpha == 0.0 and error.beta == 0.0):
        s, c = math.sin(theta / 2.0), math.cos(theta / 2.0)
        e_phi = np.exp(1j * phi)
        return 1j * np.exp(1j * theta / 2.0) * np.array(
            [[e_phi * s, c], [e_phi * c, -s]], dtype=np.complex128
        )
    return (
        _beam_splitter(np.pi / 4 + error.beta)
        @ _phase_shifter(theta)
        @ _beam_splitter(np.pi / 4 + error.alpha)
        @ _phase_shifter(phi)
    )


@cache
def mesh_layout(mode_count: int) -> Tuple[Tuple[int, int], ...]:
    """
    (column, row) slots of the rectangular mesh in application order.

    Column c holds MZIs on pairs (m, m+1) with m = c mod 2; there are
    mode_count columns and mode_count (mode_count - 1) / 2 slots.
    """
    if mode_count < 1:
        raise ValueError(f"mode_count must be at least 1, got {mode_count}")
    return tuple(
        (col, row)
        for col in range(mode_count)
        for row in range(col % 2, mode_count - 1, 2)
    )


@dataclass
class MeshParams:
    mode_count: int
    mzis: List[MziParams]
    output_phases: NDArray[np.float64]

    def __post_init__(self):
        self.mzis = [MziParams(float(t), float(p)) for t, p in self.mzis]
        self.output_phases = np.asarray(self.output_phases, dtype=np.float64)
        expected = len(mesh_layout(self.mode_count))
        if len(self.mzis) != expected:
            raise ValueError(f"mesh on {self.mode_count} modes needs {expected} MZIs, got {len(self.mzis)}")
        if self.output_phases.shape != (self.mode_count,):
            raise ValueError(f"output_phases must have length {self.mode_count}")

    @property
    def layout(self) -> Tuple[Tuple[int, int], ...]:
        return mesh_layout(self.mode_count)

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return [(row, row + 1) for _, row in self.layout]

    @classmethod
    def identity(cls, mode_count: int) -> "MeshParams":
        count = len(mesh_layout(mode_count))
        return cls(mode_count, [MziParams(np.pi, np.pi)] * count, np.zeros(mode_count))

    @classmethod
    def random(cls, mode_count: int, seed: SeedLike = None) -> "MeshParams":
        rng = np.random.default_rng(seed)
        count = len(mesh_layout(mode_count))
        angles = rng.uniform(0.0, TWO_PI, size=(count, 2))
        return cls(mode_count, [MziParams(t, p) for t, p in angles], rng.uniform(0.0, TWO_PI, mode_count))

    def to_dict(self) -> dict:
        return {
            "M": self.mode_count,
            "mzis": [
                {"col": col, "row": row, "theta": float(p.theta % TWO_PI), "phi": float(p.phi % TWO_PI)}
                for (col, row), p in zip(self.layout, self.mzis)
            ],
            "output_phases": [float(d % TWO_PI) for d in self.output_phases],
        }

    @classmethod
    def from_dict(cls, record: dict) -> "MeshParams":
        mode_count = int(record["M"])
        slots = {(int(m["col"]), int(m["row"])): MziParams(m["theta"], m["phi"]) for m in record["mzis"]}
        missing = [slot for slot in mesh_layout(mode_count) if slot not in slots]
        if missing:
            raise ValueError(f"mesh record is missing MZI slots {missing}")
        return cls(mode_count, [slots[slot] for slot in mesh_layout(mode_count)], record["output_phases"])


def embed(kernel: NDArray[np.complex128], i: int, j: int, mode_count: int) -> NDArray[np.complex128]:
    """Place a 2x2 kernel acting on modes (i, j) into an M x M identity."""
    full = np.eye(mode_count, dtype=np.complex128)
    full[np.ix_([i, j], [i, j])] = kernel
    return full


def mesh_unitary(mesh: MeshParams, errors: Optional[Sequence[SplitterError]] = None) -> NDArray[np.complex128]:
    if errors is not None and len(errors) != len(mesh.mzis):
        raise ValueError(f"{len(errors)} splitter errors for {len(mesh.mzis)} MZIs")
    unitary = np.eye(mesh.mode_count, dtype=np.complex128)
    for k, ((_, row), params) in enumerate(zip(mesh.layout, mesh.mzis)):
        kernel = mzi_transfer(params, None if errors is None else errors[k])
        unitary[[row, row + 1], :] = kernel @ unitary[[row, row + 1], :]
    return np.exp(1j * mesh.output_phases)[:, None] * unitary


def unitarity_deviation(matrix: NDArray[np.complex128]) -> float:
    return float(np.linalg.norm(matrix.conj().T @ matrix - np.eye(matrix.shape[0]), ord=2))


def _null_from_right(u: NDArray, row: int, m: int) -> MziParams:
    # U <- U T^-1 on columns (m, m+1) zeroes U[row, m]
    x, y = u[row, m], u[row, m + 1]
    return MziParams(2.0 * math.atan2(abs(y), abs(x)), float(np.angle(x) - np.angle(y) + np.pi))


def _null_from_left(u: NDArray, m: int, col: int) -> MziParams:
    # U <- T U on rows (m, m+1) zeroes U[m+1, col]
    x, y = u[m, col], u[m + 1, col]
    return MziParams(2.0 * math.atan2(abs(x), abs(y)), float(np.angle(y) - np.angle(x)))


def clements_decompose(unitary: NDArray[np.complex128]) -> MeshParams:
    """
    Rectangular-mesh parameters reproducing ``unitary``.

    Elements below the anti-diagonal are nulled alternately by inverse MZIs
    from the right and MZIs from the left; the left MZIs are then moved through
    the residual diagonal so that the phase screen ends up at the output.
    """
    u = np.array(unitary, dtype=np.complex128)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {u.shape}")
    deviation = unitarity_deviation(u)
    if deviation >= UNITARY_TOLERANCE:
        raise ValueError(f"matrix is not unitary: ||U^dag U - I|| = {deviation:.3e}")
    size = u.shape[0]

    right: List[Tuple[int, MziParams]] = []
    left: List[Tuple[int, MziParams]] = []
    for i in range(size - 1):
        for j in range(i + 1):
            if i % 2 == 0:
                m = i - j
                params = _null_from_right(u, size - 1 - j, m)
                u[:, [m, m + 1]] = u[:, [m, m + 1]] @ mzi_transfer(params).conj().T
                right.append((m, params))
            else:
                m = size - 2 - i + j
                params = _null_from_left(u, m, j)
                u[[m, m + 1], :] = mzi_transfer(params) @ u[[m, m + 1], :]
                left.append((m, params))

    diagonal = np.diag(u).copy()
    moved: List[Tuple[int, MziParams]] = []
    for m, (theta, phi) in reversed(left):
        d1, d2 = diagonal[m], diagonal[m + 1]
        moved.append((m, MziParams(theta, float(np.angle(d1) - np.angle(d2)))))
        diagonal[m] = -np.exp(-1j * (theta + phi)) * d2
        diagonal[m + 1] = -np.exp(-1j * theta) * d2

    sequence = right + moved
    return _place_in_layout(size, sequence, np.angle(diagonal))


def _place_in_layout(size: int, sequence: Sequence[Tuple[int, MziParams]], phases: NDArray) -> MeshParams:
    layout = mesh_layout(size)
    slots = {}
    depth = [0] * size
    for m, params in sequence:
        col = max(depth[m], depth[m + 1])
        if col % 2 != m % 2:
            col += 1
        if (col, m) in slots or col >= size:
            raise RuntimeError(f"MZI on modes ({m}, {m + 1}) does not fit the rectangular layout")
        slots[(col, m)] = params
        depth[m] = depth[m + 1] = col + 1
    if len(slots) != len(layout):
        raise RuntimeError(f"decomposition produced {len(slots)} MZIs for {len(layout)} slots")
    return MeshParams(size, [slots[slot] for slot in layout], np.asarray(phases, dtype=np.float64))


def sample_haar_unitary(dim: int, seed: SeedLike = None) -> NDArray[np.complex128]:
    """Haar-random unitary via QR of a complex Gaussian matrix with R's diagonal phases removed."""
    if dim < 1:
        raise ValueError(f"dim must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def sample_splitter_errors(mesh: MeshParams, sigma: float, seed: SeedLike = None) -> List[SplitterError]:
    """Independent N(0, sigma) deviations (alpha, beta) for every MZI of ``mesh``."""
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    count = len(mesh.mzis)
    if sigma == 0:
        return [SplitterError(0.0, 0.0) for _ in range(count)]
    draws = np.random.default_rng(seed).normal(0.0, sigma, size=(count, 2))
    return [SplitterError(float(a), float(b)) for a, b in draws]
