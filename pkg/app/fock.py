"""
Fock-basis bookkeeping and state-vector algebra.

Every other module works on amplitude vectors laid out in the order produced by
``enumerate_basis``: occupations sorted lexicographically descending, so that
(N, 0, ..., 0) is index 0 and (0, ..., 0, N) is the last index.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cache, cached_property
from types import MappingProxyType
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.definitions import DEFAULT_BASIS_CAP, NORM_TOLERANCE
from app.errors import BasisSizeError

_logger = logging.getLogger(__name__)

Occupation = Tuple[int, ...]

# post-construction sanity check; constructors normalize to NORM_TOLERANCE
_FLAG_TOLERANCE = 1e-10


def basis_size(mode_count: int, photon_number: int) -> int:
    return math.comb(photon_number + mode_count - 1, mode_count - 1)


def check_basis_size(mode_count: int, photon_number: int, cap: int = DEFAULT_BASIS_CAP) -> int:
    """Return the basis size, raising BasisSizeError before anything is allocated."""
    size = basis_size(mode_count, photon_number)
    if size > cap:
        raise BasisSizeError(mode_count, photon_number, size, cap)
    return size


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True)
class FockBasis:
    """Ordered occupation vectors of ``photon_number`` photons in ``mode_count`` modes."""

    mode_count: int
    photon_number: int
    occupations: Tuple[Occupation, ...]
    index_map: Mapping[Occupation, int] = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.occupations)

    def __len__(self) -> int:
        return len(self.occupations)

    def index(self, occupation: Sequence[int]) -> int:
        key = tuple(int(n) for n in occupation)
        if key not in self.index_map:
            raise KeyError(f"{key} is not in the {self.photon_number}-photon, {self.mode_count}-mode basis")
        return self.index_map[key]

    def __reduce__(self):
        return enumerate_basis, (self.mode_count, self.photon_number)

    @cached_property
    def array(self) -> np.ndarray:
        """Occupations as a read-only (size, mode_count) integer array."""
        arr = np.array(self.occupations, dtype=np.int64).reshape(self.size, self.mode_count)
        arr.setflags(write=False)
        return arr


@cache
def enumerate_basis(mode_count: int, photon_number: int) -> FockBasis:
    if mode_count < 1:
        raise ValueError(f"mode_count must be at least 1, got {mode_count}")
    if photon_number < 0:
        raise ValueError(f"photon_number must be non-negative, got {photon_number}")
    occupations = tuple(_compositions(photon_number, mode_count))
    index_map = MappingProxyType({occ: i for i, occ in enumerate(occupations)})
    return FockBasis(mode_count, photon_number, occupations, index_map)


def _readonly(vector: np.ndarray) -> np.ndarray:
    arr = np.array(vector, dtype=np.complex128, copy=True).ravel()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FockState:
    """
    Pure state stored as a map photon number -> amplitude vector.

    ``normalized`` states carry unit norm. Unnormalized states (linear
    combinations, loss branches before renormalization) carry ``weight``, the
    squared norm they were built with.
    """

    mode_count: int
    sectors: Mapping[int, np.ndarray]
    normalized: bool = True
    weight: float = 1.0

    def __post_init__(self):
        if self.mode_count < 1:
            raise ValueError(f"mode_count must be at least 1, got {self.mode_count}")
        frozen: Dict[int, np.ndarray] = {}
        for n in sorted(self.sectors):
            amps = _readonly(self.sectors[n])
            expected = basis_size(self.mode_count, int(n))
            if amps.size != expected:
                raise ValueError(
                    f"sector {n} has {amps.size} amplitudes, basis size is {expected}"
                )
            frozen[int(n)] = amps
        object.__setattr__(self, "sectors", MappingProxyType(frozen))
        if self.normalized:
            deviation = abs(self.norm_squared() - 1.0)
            if deviation > _FLAG_TOLERANCE:
                raise ValueError(f"state flagged normalized has squared norm off by {deviation:.3e}")

    def __reduce__(self):
        # sectors is a mappingproxy, which does not pickle
        return FockState, (self.mode_count, dict(self.sectors), self.normalized, self.weight)

    # ---- constructors -------------------------------------------------

    @classmethod
    def basis_state(cls, occupation: Sequence[int]) -> "FockState":
        occ = tuple(int(n) for n in occupation)
        if any(n < 0 for n in occ):
            raise ValueError(f"negative occupation in {occ}")
        basis = enumerate_basis(len(occ), sum(occ))
        amps = np.zeros(basis.size, dtype=np.complex128)
        amps[basis.index(occ)] = 1.0
        return cls(len(occ), {basis.photon_number: amps})

    @classmethod
    def vacuum(cls, mode_count: int) -> "FockState":
        return cls.basis_state((0,) * mode_count)

    @classmethod
    def from_amplitudes(
        cls,
        mode_count: int,
        amplitudes: Mapping[Sequence[int], complex],
        normalize: bool = True,
    ) -> "FockState":
        """Build a state from {occupation: amplitude}; occupations may span several sectors."""
        sectors: Dict[int, np.ndarray] = {}
        for occupation, amp in amplitudes.items():
            occ = tuple(int(n) for n in occupation)
            if len(occ) != mode_count:
                raise ValueError(f"occupation {occ} does not have {mode_count} modes")
            basis = enumerate_basis(mode_count, sum(occ))
            vec = sectors.setdefault(basis.photon_number, np.zeros(basis.size, dtype=np.complex128))
            vec[basis.index(occ)] += complex(amp)
        return cls.from_sectors(mode_count, sectors, normalize=normalize)

    @classmethod
    def from_sectors(
        cls, mode_count: int, sectors: Mapping[int, np.ndarray], normalize: bool = True
    ) -> "FockState":
        norm_sq = float(sum(np.vdot(v, v).real for v in sectors.values()))
        if not normalize:
            return cls(mode_count, sectors, normalized=False, weight=norm_sq)
        if norm_sq == 0.0:
            raise ValueError("cannot normalize a zero state")
        scale = 1.0 / math.sqrt(norm_sq)
        return cls(mode_count, {n: np.asarray(v) * scale for n, v in sectors.items()})

    @classmethod
    def from_dict(cls, record: Mapping) -> "FockState":
        mode_count = int(record["mode_count"])
        entries = record["sectors"] if "sectors" in record else [record]
        sectors = {
            int(e["photon_number"]): np.array([complex(re, im) for re, im in e["amplitudes"]])
            for e in entries
        }
        return cls.from_sectors(mode_count, sectors, normalize=bool(record.get("normalized", True)))

    # ---- queries ------------------------------------------------------

    @property
    def photon_numbers(self) -> Tuple[int, ...]:
        return tuple(self.sectors)

    def basis(self, photon_number: int) -> FockBasis:
        return enumerate_basis(self.mode_count, photon_number)

    def sector(self, photon_number: int) -> Optional[np.ndarray]:
        return self.sectors.get(photon_number)

    def amplitude(self, occupation: Sequence[int]) -> complex:
        occ = tuple(occupation)
        vec = self.sectors.get(sum(occ))
        if vec is None:
            return 0j
        return complex(vec[self.basis(sum(occ)).index(occ)])

    def norm_squared(self) -> float:
        return float(sum(np.vdot(v, v).real for v in self.sectors.values()))

    def is_normalized(self, tol: float = NORM_TOLERANCE) -> bool:
        return abs(self.norm_squared() - 1.0) <= tol

    def normalize(self) -> "FockState":
        return FockState.from_sectors(self.mode_count, self.sectors, normalize=True)

    def scaled(self, factor: complex) -> "FockState":
        return FockState.from_sectors(
            self.mode_count, {n: v * factor for n, v in self.sectors.items()}, normalize=False
        )

    def with_sectors(self, sectors: Mapping[int, np.ndarray]) -> "FockState":
        """Same mode count and flag, new amplitudes (used by norm-preserving maps)."""
        if self.normalized:
            return FockState(self.mode_count, sectors)
        return FockState.from_sectors(self.mode_count, sectors, normalize=False)

    def to_dict(self) -> dict:
        def encode(v: np.ndarray):
            return [[float(a.real), float(a.imag)] for a in v]

        if len(self.sectors) == 1:
            (n, vec), = self.sectors.items()
            record = {"mode_count": self.mode_count, "photon_number": n, "amplitudes": encode(vec)}
        else:
            record = {
                "mode_count": self.mode_count,
                "sectors": [{"photon_number": n, "amplitudes": encode(v)} for n, v in self.sectors.items()],
            }
        if not self.normalized:
            record["normalized"] = False
        return record


def superpose(states: Sequence[FockState], coefficients: Iterable[complex], normalize: bool = False) -> FockState:
    """Linear combination sum_k c_k |state_k>."""
    states = list(states)
    if not states:
        raise ValueError("need at least one state")
    mode_count = states[0].mode_count
    sectors: Dict[int, np.ndarray] = {}
    for state, c in zip(states, coefficients):
        if state.mode_count != mode_count:
            raise ValueError("all states must share a mode count")
        for n, vec in state.sectors.items():
            acc = sectors.setdefault(n, np.zeros(vec.size, dtype=np.complex128))
            acc += complex(c) * vec
    return FockState.from_sectors(mode_count, sectors, normalize=normalize)


def inner_product(a: FockState, b: FockState) -> complex:
    """<a|b>, conjugate-linear in ``a``; sectors present in only one state contribute zero."""
    if a.mode_count != b.mode_count:
        raise ValueError(f"mode count mismatch: {a.mode_count} vs {b.mode_count}")
    total = 0j
    for n, vec in a.sectors.items():
        other = b.sectors.get(n)
        if other is not None:
            total += complex(np.vdot(vec, other))
    return total


@cache
def _lowering_map(mode_count: int, photon_number: int, mode: int):
    src_basis = enumerate_basis(mode_count, photon_number)
    dst_basis = enumerate_basis(mode_count, photon_number - 1)
    occ = src_basis.array
    src = np.flatnonzero(occ[:, mode] > 0)
    lowered = occ[src].copy()
    lowered[:, mode] -= 1
    dst = np.array([dst_basis.index(row) for row in lowered], dtype=np.int64)
    factor = np.sqrt(occ[src, mode].astype(float))
    return src, dst, factor


def apply_loss(state: FockState, mode: int) -> Tuple[FockState, float]:
    """
    Annihilate one photon in ``mode``.

    Returns the renormalized post-loss state and the branch weight
    ||a_mode |state>||^2. An input with no photon in ``mode`` returns
    (vacuum, 0.0).
    """
    if not 0 <= mode < state.mode_count:
        raise IndexError(f"mode {mode} out of range for {state.mode_count} modes")
    out: Dict[int, np.ndarray] = {}
    for n, vec in state.sectors.items():
        if n == 0:
            continue
        src, dst, factor = _lowering_map(state.mode_count, n, mode)
        lowered = np.zeros(basis_size(state.mode_count, n - 1), dtype=np.complex128)
        lowered[dst] = vec[src] * factor
        out[n - 1] = lowered
    weight = float(sum(np.vdot(v, v).real for v in out.values()))
    if weight == 0.0:
        return FockState.vacuum(state.mode_count), 0.0
    return FockState.from_sectors(state.mode_count, out, normalize=True), weight


def total_photon_number(state: FockState, modes: Optional[Sequence[int]] = None) -> Dict[int, float]:
    """
    Distribution of the photon number counted on ``modes`` (all modes by default).

    This is the outcome distribution of a non-demolition photon-number
    measurement; outcomes with exactly zero probability are omitted.
    """
    weights: Dict[int, float] = {}
    for n, vec in state.sectors.items():
        probs = np.abs(vec) ** 2
        if modes is None:
            weights[n] = weights.get(n, 0.0) + float(probs.sum())
            continue
        counts = state.basis(n).array[:, list(modes)].sum(axis=1)
        for count in np.unique(counts):
            weights[int(count)] = weights.get(int(count), 0.0) + float(probs[counts == count].sum())
    total = sum(weights.values())
    if total == 0.0:
        return {}
    return {n: w / total for n, w in sorted(weights.items()) if w > 0.0}


@cache
def _product_index(left_modes: int, left_n: int, right_modes: int, right_n: int) -> np.ndarray:
    left = enumerate_basis(left_modes, left_n)
    right = enumerate_basis(right_modes, right_n)
    target = enumerate_basis(left_modes + right_modes, left_n + right_n)
    return np.array(
        [[target.index(a + b) for b in right.occupations] for a in left.occupations],
        dtype=np.int64,
    ).reshape(left.size, right.size)


def tensor_product(left: FockState, right: FockState) -> FockState:
    """|left> (x) |right> on left.mode_count + right.mode_count modes."""
    mode_count = left.mode_count + right.mode_count
    sectors: Dict[int, np.ndarray] = {}
    for na, va in left.sectors.items():
        for nb, vb in right.sectors.items():
            index = _product_index(left.mode_count, na, right.mode_count, nb)
            acc = sectors.setdefault(na + nb, np.zeros(basis_size(mode_count, na + nb), dtype=np.complex128))
            acc[index.ravel()] += np.outer(va, vb).ravel()
    if left.normalized and right.normalized:
        return FockState(mode_count, sectors)
    return FockState.from_sectors(mode_count, sectors, normalize=False)


@cache
def _permutation_index(mode_count: int, photon_number: int, order: Tuple[int, ...]) -> np.ndarray:
    basis = enumerate_basis(mode_count, photon_number)
    permuted = basis.array[:, list(order)]
    return np.array([basis.index(row) for row in permuted], dtype=np.int64)


def permute_modes(state: FockState, order: Sequence[int]) -> FockState:
    """Relabel modes so that new mode k carries the old mode ``order[k]``."""
    order = tuple(int(k) for k in order)
    if sorted(order) != list(range(state.mode_count)):
        raise ValueError(f"{order} is not a permutation of {state.mode_count} modes")
    sectors = {}
    for n, vec in state.sectors.items():
        # old element j lands on new element index[j]
        index = _permutation_index(state.mode_count, n, order)
        out = np.zeros_like(vec)
        out[index] = vec
        sectors[n] = out
    return state.with_sectors(sectors)
