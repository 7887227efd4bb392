"""
Quantum photonic neural network: L layers of (rectangular mesh, per-mode
nonlinear phase gate) applied to Fock-space amplitudes.

Flat parameter packing ("v1"), layer-major; within a layer:
    theta_0, phi_0, theta_1, phi_1, ...   MZIs in mesh layout order
    delta_0 .. delta_{M-1}                output phase screen
    phi1_0 .. phi1_{M-1}                  activation phi1 per mode
    phi2_0 .. phi2_{M-1}                  activation phi2 per mode
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from app.fock import FockBasis, FockState, enumerate_basis
from app.focklift import apply_kernel_array
from app.interferometer import (
    TWO_PI,
    MeshParams,
    MziParams,
    SeedLike,
    SplitterError,
    mesh_layout,
    mzi_transfer,
)
from app.nonlinearity import NonlinearParams, layer_phases

_logger = logging.getLogger(__name__)

PACKING = "v1"

LayerErrors = Sequence[Sequence[SplitterError]]


def layer_parameter_count(mode_count: int) -> int:
    return mode_count * (mode_count - 1) + 3 * mode_count


@dataclass
class NetworkParams:
    mode_count: int
    layer_count: int
    meshes: List[MeshParams]
    phi1: NDArray[np.float64]
    phi2: NDArray[np.float64]
    final_activation: bool = True

    def __post_init__(self):
        self.phi1 = np.asarray(self.phi1, dtype=np.float64).reshape(self.layer_count, self.mode_count)
        self.phi2 = np.asarray(self.phi2, dtype=np.float64).reshape(self.layer_count, self.mode_count)
        if len(self.meshes) != self.layer_count:
            raise ValueError(f"{len(self.meshes)} meshes for {self.layer_count} layers")
        for mesh in self.meshes:
            if mesh.mode_count != self.mode_count:
                raise ValueError(f"mesh on {mesh.mode_count} modes in a {self.mode_count}-mode network")

    @staticmethod
    def count(mode_count: int, layer_count: int) -> int:
        return layer_count * layer_parameter_count(mode_count)

    @property
    def size(self) -> int:
        return self.count(self.mode_count, self.layer_count)

    def activations(self, layer: int) -> List[NonlinearParams]:
        return [NonlinearParams(a, b) for a, b in zip(self.phi1[layer], self.phi2[layer])]

    def has_activation(self, layer: int) -> bool:
        return self.final_activation or layer < self.layer_count - 1

    def flatten(self) -> NDArray[np.float64]:
        chunks = []
        for layer, mesh in enumerate(self.meshes):
            chunks.append(np.asarray(mesh.mzis, dtype=np.float64).ravel())
            chunks.append(mesh.output_phases)
            chunks.append(self.phi1[layer])
            chunks.append(self.phi2[layer])
        if not chunks:
            return np.zeros(0)
        return np.concatenate(chunks)

    @classmethod
    def unflatten(
        cls, mode_count: int, layer_count: int, vector: NDArray, final_activation: bool = True
    ) -> "NetworkParams":
        vector = np.asarray(vector, dtype=np.float64)
        expected = cls.count(mode_count, layer_count)
        if vector.shape != (expected,):
            raise ValueError(f"expected {expected} parameters, got shape {vector.shape}")
        mzi_count = len(mesh_layout(mode_count))
        per_layer = vector.reshape(layer_count, layer_parameter_count(mode_count))
        meshes, phi1, phi2 = [], [], []
        for row in per_layer:
            angles = row[: 2 * mzi_count].reshape(mzi_count, 2)
            rest = row[2 * mzi_count:]
            meshes.append(MeshParams(mode_count, [MziParams(t, p) for t, p in angles], rest[:mode_count]))
            phi1.append(rest[mode_count: 2 * mode_count])
            phi2.append(rest[2 * mode_count:])
        return cls(mode_count, layer_count, meshes, phi1, phi2, final_activation)

    def with_vector(self, vector: NDArray) -> "NetworkParams":
        return self.unflatten(self.mode_count, self.layer_count, vector, self.final_activation)

    @classmethod
    def random(
        cls, mode_count: int, layer_count: int, seed: SeedLike = None, final_activation: bool = True
    ) -> "NetworkParams":
        """All phases i.i.d. uniform on [0, 2 pi)."""
        rng = np.random.default_rng(seed)
        vector = rng.uniform(0.0, TWO_PI, size=cls.count(mode_count, layer_count))
        return cls.unflatten(mode_count, layer_count, vector, final_activation)

    @classmethod
    def identity(cls, mode_count: int, layer_count: int, final_activation: bool = True) -> "NetworkParams":
        zeros = np.zeros((layer_count, mode_count))
        meshes = [MeshParams.identity(mode_count) for _ in range(layer_count)]
        return cls(mode_count, layer_count, meshes, zeros, zeros.copy(), final_activation)

    def to_checkpoint(self) -> dict:
        return {
            "M": self.mode_count,
            "L": self.layer_count,
            "params": [float(p) for p in self.flatten()],
            "packing": PACKING,
            "final_activation": self.final_activation,
        }

    @classmethod
    def from_checkpoint(cls, record: dict) -> "NetworkParams":
        if record.get("packing", PACKING) != PACKING:
            raise ValueError(f"unsupported parameter packing {record.get('packing')!r}")
        return cls.unflatten(
            int(record["M"]), int(record["L"]), record["params"], bool(record.get("final_activation", True))
        )


def _check_errors(params: NetworkParams, errors: Optional[LayerErrors]) -> None:
    if errors is None:
        return
    if len(errors) != params.layer_count:
        raise ValueError(f"{len(errors)} error lists for {params.layer_count} layers")
    for layer, (mesh, layer_errors) in enumerate(zip(params.meshes, errors)):
        if len(layer_errors) != len(mesh.mzis):
            raise ValueError(f"layer {layer}: {len(layer_errors)} splitter errors for {len(mesh.mzis)} MZIs")


def propagate(
    amps: NDArray[np.complex128],
    params: NetworkParams,
    mode_count: int,
    photon_number: int,
    errors: Optional[LayerErrors] = None,
    modes: Optional[Sequence[int]] = None,
) -> NDArray[np.complex128]:
    """
    Push amplitude arrays of shape (..., basis size) through the network.

    ``modes[k]`` is the state mode that network mode k acts on, so a small
    network can act on part of a larger register.
    """
    _check_errors(params, errors)
    modes = list(range(params.mode_count)) if modes is None else list(modes)
    occupations = enumerate_basis(mode_count, photon_number).array[:, modes]
    out = np.array(amps, dtype=np.complex128, copy=True)
    for layer, mesh in enumerate(params.meshes):
        for k, ((_, row), mzi) in enumerate(zip(mesh.layout, mesh.mzis)):
            kernel = mzi_transfer(mzi, None if errors is None else errors[layer][k])
            out = apply_kernel_array(out, mode_count, photon_number, (modes[row], modes[row + 1]), kernel)
        phase = occupations @ mesh.output_phases
        if params.has_activation(layer):
            phase = phase + layer_phases(occupations, params.activations(layer))
        out *= np.exp(1j * phase)
    return out


def forward(
    state: FockState,
    params: NetworkParams,
    errors: Optional[LayerErrors] = None,
    modes: Optional[Sequence[int]] = None,
) -> FockState:
    if modes is None and state.mode_count != params.mode_count:
        raise ValueError(f"{state.mode_count}-mode state into a {params.mode_count}-mode network")
    if modes is not None:
        if len(modes) != params.mode_count or len(set(modes)) != len(modes):
            raise ValueError(f"mode map {list(modes)} does not fit a {params.mode_count}-mode network")
        if max(modes) >= state.mode_count or min(modes) < 0:
            raise IndexError(f"mode map {list(modes)} out of range for {state.mode_count} modes")
    sectors = {
        n: propagate(vec, params, state.mode_count, n, errors, modes)
        for n, vec in state.sectors.items()
    }
    return state.with_sectors(sectors)


def network_matrix(
    params: NetworkParams, basis: FockBasis, errors: Optional[LayerErrors] = None
) -> NDArray[np.complex128]:
    """Dense Fock-space matrix; column j is the network applied to basis element j."""
    if basis.mode_count != params.mode_count:
        raise ValueError(f"{basis.mode_count}-mode basis for a {params.mode_count}-mode network")
    rows = propagate(np.eye(basis.size), params, basis.mode_count, basis.photon_number, errors)
    return rows.T
