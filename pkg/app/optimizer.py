"""
Fidelity objectives, their gradients and the Adam training loop.

Every objective reduces to a complex overlap z = sum_k <t_k| W |s_k> between
network outputs and fixed target vectors, followed by a real fidelity F(z).
The loss is (1 - F)^2. Gradients are computed by the adjoint method: the
output state and the adjoint seed are propagated backwards through the
layer chain together, collecting closed-form derivatives of each MZI, phase
screen and activation on the way.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from app.config import TrainConfig
from app.definitions import FINITE_DIFFERENCE_STEP, LOG_FORMAT, UNITARY_TOLERANCE
from app.errors import DivergenceError
from app.fock import FockState, enumerate_basis, inner_product, superpose
from app.focklift import apply_kernel_array
from app.interferometer import mzi_transfer
from app.network import LayerErrors, NetworkParams, layer_parameter_count, propagate
from app.nonlinearity import layer_phases

# ===============================
# Logging Configuration
# ===============================
_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
if not _logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _logger.addHandler(_handler)

# Output-side generator of d/dtheta for the MZI: dT/dtheta = G T
_THETA_GENERATOR = np.array([[0.5j, 0.5], [-0.5, 0.5j]], dtype=np.complex128)


# ===============================
# Fidelities
# ===============================
def state_fidelity(out: FockState, target: FockState) -> float:
    """|<target|out>|; sectors present in only one of the states contribute nothing."""
    for name, state in (("out", out), ("target", target)):
        if not state.is_normalized(1e-10):
            raise ValueError(f"{name} state is not normalized (squared norm {state.norm_squared():.12g})")
    return min(1.0, abs(inner_product(target, out)))


def _check_isometry(code: NDArray, name: str) -> None:
    gram = code.conj().T @ code
    deviation = np.abs(gram - np.eye(gram.shape[0])).max()
    if deviation > UNITARY_TOLERANCE:
        raise ValueError(f"{name} code vectors are not orthonormal (max |P^dag P - I| = {deviation:.3e})")


def average_fidelity(trace: complex, dim: int) -> float:
    """(d F_pro + 1) / (d + 1) with F_pro = |trace|^2 / d^2."""
    process = abs(trace) ** 2 / dim**2
    return (dim * process + 1.0) / (dim + 1.0)


def channel_fidelity(
    matrix: NDArray[np.complex128],
    target: NDArray[np.complex128],
    code_in: NDArray[np.complex128],
    code_out: Optional[NDArray[np.complex128]] = None,
) -> float:
    """
    Average fidelity of ``matrix`` against the d x d ``target`` on a code.

    ``code_in`` holds the d code vectors as columns; ``code_out`` (default:
    ``code_in``) is the code the outputs are read in.
    """
    code_in = np.asarray(code_in, dtype=np.complex128)
    code_out = code_in if code_out is None else np.asarray(code_out, dtype=np.complex128)
    target = np.asarray(target, dtype=np.complex128)
    dim = code_in.shape[1]
    if target.shape != (dim, dim) or code_out.shape != code_in.shape:
        raise ValueError(f"target {target.shape} and codes {code_in.shape}, {code_out.shape} do not agree")
    _check_isometry(code_in, "input")
    _check_isometry(code_out, "output")
    effective = target.conj().T @ (code_out.conj().T @ matrix @ code_in)
    return average_fidelity(np.trace(effective), dim)


def loss(value: float) -> float:
    return (1.0 - value) ** 2


# ===============================
# Objectives
# ===============================
class Batch(NamedTuple):
    """Input rows and the target rows they are overlapped with, in one Fock sector."""

    mode_count: int
    photon_number: int
    inputs: NDArray[np.complex128]
    targets: NDArray[np.complex128]


@dataclass
class Evaluation:
    loss: float
    fidelity: float
    gradient: Optional[NDArray[np.float64]] = None


class Objective:
    """
    Base class for overlap objectives.

    Subclasses provide ``batches`` and ``_score``, which maps the overlap z to
    (fidelity, w) with dL/dp = Re(conj(w) dz/dp).
    """

    batches: List[Batch]
    modes: Optional[Sequence[int]] = None

    def _score(self, overlap: complex) -> Tuple[float, complex]:
        raise NotImplementedError

    def outputs(self, params: NetworkParams, errors: Optional[LayerErrors] = None) -> List[NDArray]:
        return [
            propagate(b.inputs, params, b.mode_count, b.photon_number, errors, self.modes)
            for b in self.batches
        ]

    def _overlap(self, outputs: List[NDArray]) -> complex:
        return complex(sum(np.vdot(b.targets, out) for b, out in zip(self.batches, outputs)))

    def evaluate(self, params: NetworkParams, errors: Optional[LayerErrors] = None) -> Evaluation:
        fidelity, _ = self._score(self._overlap(self.outputs(params, errors)))
        return Evaluation(loss(fidelity), fidelity)

    def value_and_grad(self, params: NetworkParams) -> Evaluation:
        outputs = self.outputs(params)
        fidelity, weight = self._score(self._overlap(outputs))
        grad = np.zeros(params.size)
        for batch, out in zip(self.batches, outputs):
            grad += adjoint_gradient(params, batch, out, weight * batch.targets, self.modes)
        return Evaluation(loss(fidelity), fidelity, grad)

    def projections(self, params: NetworkParams) -> NDArray[np.float64]:
        """|amplitude| of every output basis element for the first input row."""
        first = self.batches[0]
        out = propagate(first.inputs[:1], params, first.mode_count, first.photon_number, modes=self.modes)
        return np.abs(out[0])


class StateObjective(Objective):
    """F = |<target| W |input>| for a (possibly multi-sector) input state."""

    def __init__(self, input_state: FockState, target: FockState, modes: Optional[Sequence[int]] = None):
        if input_state.mode_count != target.mode_count:
            raise ValueError(f"input has {input_state.mode_count} modes, target {target.mode_count}")
        self.input_state = input_state
        self.target = target
        self.modes = modes
        self.batches = []
        for n, vec in input_state.sectors.items():
            goal = target.sector(n)
            if goal is None:
                goal = np.zeros_like(vec)
            self.batches.append(Batch(input_state.mode_count, n, vec[None, :], np.asarray(goal)[None, :]))

    def _score(self, overlap: complex) -> Tuple[float, complex]:
        fidelity = abs(overlap)
        if fidelity == 0.0:
            return 0.0, 0j
        return min(fidelity, 1.0), -2.0 * (1.0 - fidelity) * overlap / fidelity


class ChannelObjective(Objective):
    """
    Average channel fidelity of W against ``target`` on a code.

    Input code vector a is driven through the network and overlapped with
    q_a = sum_b target[b, a] code_out[b], so that z = Tr(target^dag P_out^dag W P_in).
    """

    def __init__(
        self,
        code_in: Sequence[FockState],
        target: NDArray[np.complex128],
        code_out: Optional[Sequence[FockState]] = None,
        modes: Optional[Sequence[int]] = None,
    ):
        code_in = list(code_in)
        code_out = code_in if code_out is None else list(code_out)
        target = np.asarray(target, dtype=np.complex128)
        dim = len(code_in)
        if target.shape != (dim, dim) or len(code_out) != dim:
            raise ValueError(f"target of shape {target.shape} for a {dim}-dimensional code")
        for states, name in ((code_in, "input"), (code_out, "output")):
            gram = np.array([[inner_product(a, b) for b in states] for a in states])
            deviation = np.abs(gram - np.eye(dim)).max()
            if deviation > UNITARY_TOLERANCE:
                raise ValueError(f"{name} code vectors are not orthonormal (max |P^dag P - I| = {deviation:.3e})")
        self.dim = dim
        self.target = target
        self.modes = modes
        rows: Dict[int, Tuple[list, list]] = {}
        mode_count = code_in[0].mode_count
        for a, state in enumerate(code_in):
            goal = superpose(code_out, target[:, a])
            for n, vec in state.sectors.items():
                inputs, targets = rows.setdefault(n, ([], []))
                inputs.append(vec)
                other = goal.sector(n)
                targets.append(np.zeros_like(vec) if other is None else np.asarray(other))
        self.batches = [
            Batch(mode_count, n, np.array(inputs), np.array(targets)) for n, (inputs, targets) in rows.items()
        ]

    def _score(self, overlap: complex) -> Tuple[float, complex]:
        fidelity = min(average_fidelity(overlap, self.dim), 1.0)
        weight = -2.0 * (1.0 - fidelity) * 2.0 * overlap / (self.dim * (self.dim + 1))
        return fidelity, weight


class MeanObjective(Objective):
    """Unweighted mean of child losses and fidelities."""

    def __init__(self, children: Sequence[Objective]):
        self.children = list(children)
        if not self.children:
            raise ValueError("MeanObjective needs at least one child")
        self.batches = self.children[0].batches
        self.modes = self.children[0].modes

    def evaluate(self, params: NetworkParams, errors: Optional[LayerErrors] = None) -> Evaluation:
        parts = [child.evaluate(params, errors) for child in self.children]
        return Evaluation(
            float(np.mean([p.loss for p in parts])), float(np.mean([p.fidelity for p in parts]))
        )

    def value_and_grad(self, params: NetworkParams) -> Evaluation:
        parts = [child.value_and_grad(params) for child in self.children]
        count = len(parts)
        return Evaluation(
            float(np.mean([p.loss for p in parts])),
            float(np.mean([p.fidelity for p in parts])),
            sum(p.gradient for p in parts) / count,
        )

    def fidelities(self, params: NetworkParams, errors: Optional[LayerErrors] = None) -> List[float]:
        return [child.evaluate(params, errors).fidelity for child in self.children]

    def projections(self, params: NetworkParams) -> NDArray[np.float64]:
        return self.children[0].projections(params)


# ===============================
# Gradients
# ===============================
def _diagonal_columns(occupations: NDArray[np.int64]) -> NDArray[np.float64]:
    """d(phase)/d(delta_m, phi1_m, phi2_m) for each basis row."""
    return np.concatenate(
        [occupations, occupations >= 1, np.maximum(occupations - 1, 0)], axis=1
    ).astype(np.float64)


def adjoint_gradient(
    params: NetworkParams,
    batch: Batch,
    outputs: NDArray[np.complex128],
    seeds: NDArray[np.complex128],
    modes: Optional[Sequence[int]] = None,
) -> NDArray[np.float64]:
    """
    Gradient of Re <seeds| W(p) |inputs> with respect to the flat parameters,
    given the forward ``outputs`` = W(p) inputs.
    """
    mode_count = params.mode_count
    modes = list(range(mode_count)) if modes is None else list(modes)
    occupations = enumerate_basis(batch.mode_count, batch.photon_number).array[:, modes]
    columns = _diagonal_columns(occupations)
    per_layer = layer_parameter_count(mode_count)
    mzi_count = mode_count * (mode_count - 1) // 2

    # index 0: state, index 1: adjoint
    pair = np.stack([np.asarray(outputs, dtype=np.complex128), np.asarray(seeds, dtype=np.complex128)])
    grad = np.zeros(params.size)
    for layer in reversed(range(params.layer_count)):
        mesh = params.meshes[layer]
        offset = layer * per_layer
        diag_slice = slice(offset + 2 * mzi_count, offset + per_layer)

        phase = occupations @ mesh.output_phases
        if params.has_activation(layer):
            phase = phase + layer_phases(occupations, params.activations(layer))
        density = (pair[1].conj() * pair[0]).sum(axis=0)
        diag_grad = -np.imag(density @ columns)
        if not params.has_activation(layer):
            diag_grad[mode_count:] = 0.0
        grad[diag_slice] = diag_grad
        pair = pair * np.exp(-1j * phase)

        for k in reversed(range(mzi_count)):
            _, row = mesh.layout[k]
            pair_modes = (modes[row], modes[row + 1])
            kernel = mzi_transfer(mesh.mzis[k])
            moved = apply_kernel_array(
                pair[0], batch.mode_count, batch.photon_number, pair_modes, _THETA_GENERATOR, generator=True
            )
            grad[offset + 2 * k] = float(np.real(np.vdot(pair[1], moved)))
            pair = apply_kernel_array(pair, batch.mode_count, batch.photon_number, pair_modes, kernel.conj().T)
            top = occupations[:, row]
            grad[offset + 2 * k + 1] = float(-np.imag((pair[1].conj() * pair[0] * top).sum()))
    return grad


def central_difference_gradient(
    objective: Objective, params: NetworkParams, step: float = FINITE_DIFFERENCE_STEP
) -> NDArray[np.float64]:
    vector = params.flatten()
    grad = np.zeros_like(vector)
    for k in range(vector.size):
        shifted = vector.copy()
        shifted[k] = vector[k] + step
        upper = objective.evaluate(params.with_vector(shifted)).loss
        shifted[k] = vector[k] - step
        lower = objective.evaluate(params.with_vector(shifted)).loss
        grad[k] = (upper - lower) / (2.0 * step)
    return grad


def gradient(
    params: NetworkParams, objective: Objective, method: str = "analytic", step: float = FINITE_DIFFERENCE_STEP
) -> NDArray[np.float64]:
    """Loss gradient in the flat packing order of ``params``."""
    if method == "analytic":
        return objective.value_and_grad(params).gradient
    if method == "central":
        return central_difference_gradient(objective, params, step)
    raise ValueError(f"unknown gradient method {method!r}")


# ===============================
# Training
# ===============================
@dataclass
class TrainingTrace:
    loss: List[float] = field(default_factory=list)
    fidelity: List[float] = field(default_factory=list)
    projections: List[NDArray[np.float64]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.loss)

    def append(self, evaluation: Evaluation, projection: Optional[NDArray] = None) -> None:
        self.loss.append(float(evaluation.loss))
        self.fidelity.append(float(evaluation.fidelity))
        if projection is not None:
            self.projections.append(projection)

    def rows(self) -> List[dict]:
        rows = []
        for k, (value, fid) in enumerate(zip(self.loss, self.fidelity)):
            row = {"iteration": k, "loss": value, "fidelity": fid}
            if k < len(self.projections):
                row.update({f"projection_{j}": float(p) for j, p in enumerate(self.projections[k])})
            rows.append(row)
        return rows

    def columns(self) -> List[str]:
        columns = ["iteration", "loss", "fidelity"]
        if self.projections:
            columns += [f"projection_{j}" for j in range(len(self.projections[0]))]
        return columns


def train(
    params: NetworkParams, objective: Objective, cfg: TrainConfig, label: str = "train"
) -> Tuple[NetworkParams, TrainingTrace]:
    """
    Adam on the flat parameter vector with a linearly annealed learning rate.

    The trace records the loss and fidelity of the parameters each update
    starts from, and the returned parameters are the ones its last entry
    scored. A non-finite loss or gradient raises DivergenceError.
    """
    vector = params.flatten()
    first = np.zeros_like(vector)
    second = np.zeros_like(vector)
    trace = TrainingTrace()
    _logger.info("%s: %d parameters, %d iterations, %s gradient", label, vector.size, cfg.iterations, cfg.gradient)

    for t in tqdm(range(cfg.iterations), desc=label, disable=not cfg.progress):
        current = params.with_vector(vector)
        if cfg.gradient == "analytic":
            evaluation = objective.value_and_grad(current)
        else:
            evaluation = objective.evaluate(current)
            evaluation.gradient = central_difference_gradient(objective, current, cfg.fd_step)
        if not np.isfinite(evaluation.loss) or not np.all(np.isfinite(evaluation.gradient)):
            raise DivergenceError(t, evaluation.loss)
        trace.append(evaluation, objective.projections(current) if cfg.record_projections else None)
        if t % cfg.log_every == 0 or t == cfg.iterations - 1:
            _logger.info("%s: iteration %d loss %.3e fidelity %.6f", label, t, evaluation.loss, evaluation.fidelity)
        if t == cfg.iterations - 1:
            break

        g = evaluation.gradient
        first = cfg.beta1 * first + (1.0 - cfg.beta1) * g
        second = cfg.beta2 * second + (1.0 - cfg.beta2) * g * g
        first_hat = first / (1.0 - cfg.beta1 ** (t + 1))
        second_hat = second / (1.0 - cfg.beta2 ** (t + 1))
        vector = vector - cfg.learning_rate(t) * first_hat / (np.sqrt(second_hat) + cfg.eps)

    return current, trace
