"""
Benchmark experiments: state preparation, channel preparation on a bosonic
code, the logical CZ circuit, splitter-error Monte Carlo, the routing gate
and the photon-loss correction pipeline.

Seed splitting: every random stream is a child of
``numpy.random.SeedSequence(root)``. Named purposes use a spawn key derived
from the purpose string; Monte Carlo sample k uses child k of
``SeedSequence(root).spawn(samples)``, whatever the worker count.
"""

import logging
import math
import zlib
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from app.codes import CodeSpec, binomial_code, logical_gate_target
from app.config import TrainConfig
from app.correction_workflow import (
    ANCILLA,
    CODE_MODES,
    CorrectionPipeline,
    register_state,
    run_branch,
)
from app.definitions import DEFAULT_BASIS_CAP, LOG_FORMAT
from app.fock import FockBasis, FockState, apply_loss, check_basis_size, enumerate_basis, permute_modes, tensor_product
from app.focklift import apply_kernel_array
from app.interferometer import MziParams, SeedLike, mzi_transfer, sample_haar_unitary, sample_splitter_errors
from app.network import NetworkParams, forward, propagate
from app.nonlinearity import NonlinearParams, nl_phase
from app.optimizer import (
    ChannelObjective,
    MeanObjective,
    Objective,
    StateObjective,
    TrainingTrace,
    average_fidelity,
    state_fidelity,
    train,
)

# ===============================
# Logging Configuration
# ===============================
_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
if not _logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _logger.addHandler(_handler)

__all__ = [
    "CodeSpec",
    "binomial_code",
    "logical_gate_target",
    "make_noon_state",
    "sample_haar_state",
    "run_state_prep",
    "run_channel_prep",
    "run_logical_cz",
    "splitter_monte_carlo",
    "train_routing_gate",
    "train_correction_pipeline",
    "run_loss_correction_demo",
]


# ===============================
# Seeds
# ===============================
def named_seed(root: int, purpose: str) -> np.random.SeedSequence:
    """Independent stream for a named purpose, stable across runs and platforms."""
    return np.random.SeedSequence(root, spawn_key=(zlib.crc32(purpose.encode()),))


def spawn_seeds(root: int, count: int) -> List[np.random.SeedSequence]:
    return np.random.SeedSequence(root).spawn(count)


# ===============================
# Target states
# ===============================
def make_noon_state(photons: int, pair: Tuple[int, int] = (0, 1), mode_count: int = 2) -> FockState:
    """(|N,0> + |0,N>)/sqrt(2) on ``pair``, vacuum elsewhere."""
    if photons < 1:
        raise ValueError(f"a N00N state needs at least one photon, got {photons}")
    i, j = pair
    for mode in pair:
        if not 0 <= mode < mode_count:
            raise IndexError(f"mode {mode} out of range for {mode_count} modes")
    if i == j:
        raise ValueError(f"N00N modes must differ, got {pair}")
    first, second = [0] * mode_count, [0] * mode_count
    first[i] = photons
    second[j] = photons
    return FockState.from_amplitudes(mode_count, {tuple(first): 1.0, tuple(second): 1.0})


def sample_haar_state(basis: FockBasis, seed: SeedLike = None) -> FockState:
    """Haar unitary on the whole N-photon subspace applied to its first basis vector."""
    unitary = sample_haar_unitary(basis.size, seed)
    return FockState(basis.mode_count, {basis.photon_number: unitary[:, 0]})


def single_photon_input(photons: int, mode_count: int) -> FockState:
    """One photon in each of the first ``photons`` modes."""
    if photons > mode_count:
        raise ValueError(f"cannot place {photons} single photons in {mode_count} modes")
    return FockState.basis_state([1] * photons + [0] * (mode_count - photons))


# ===============================
# Training experiments
# ===============================
class TrainingResult(NamedTuple):
    params: NetworkParams
    fidelity: float
    trace: TrainingTrace


def _check_sectors(state: FockState, cap: int) -> None:
    for n in state.photon_numbers:
        check_basis_size(state.mode_count, n, cap)


def run_state_prep(
    target: FockState,
    input_state: FockState,
    layers: int,
    cfg: TrainConfig,
    basis_cap: int = DEFAULT_BASIS_CAP,
    initial: Optional[NetworkParams] = None,
) -> TrainingResult:
    if target.mode_count != input_state.mode_count:
        raise ValueError(f"target has {target.mode_count} modes, input {input_state.mode_count}")
    if set(target.photon_numbers) != set(input_state.photon_numbers):
        raise ValueError(
            f"photon numbers differ: input {input_state.photon_numbers}, target {target.photon_numbers}"
        )
    _check_sectors(input_state, basis_cap)
    params = initial if initial is not None else NetworkParams.random(input_state.mode_count, layers, seed=cfg.seed)
    objective = StateObjective(input_state, target)
    params, trace = train(params, objective, cfg, label="state-prep")
    fidelity = state_fidelity(forward(input_state, params), target)
    _logger.info("State preparation finished with fidelity %.6f", fidelity)
    return TrainingResult(params, fidelity, trace)


def channel_task(code: CodeSpec, gate: str) -> Tuple[List[FockState], NDArray, List[FockState]]:
    """(code_in, target, code_out) of a channel-preparation task."""
    if gate == "encode":
        return code.fock_inputs(), np.eye(2, dtype=np.complex128), code.logical
    return code.logical, logical_gate_target(gate), code.logical


def run_channel_prep(
    code_in: Sequence[FockState],
    target: NDArray[np.complex128],
    layers: int,
    cfg: TrainConfig,
    code_out: Optional[Sequence[FockState]] = None,
    basis_cap: int = DEFAULT_BASIS_CAP,
    label: str = "channel-prep",
) -> TrainingResult:
    for state in code_in:
        _check_sectors(state, basis_cap)
    objective = ChannelObjective(code_in, target, code_out)
    params = NetworkParams.random(code_in[0].mode_count, layers, seed=cfg.seed)
    params, trace = train(params, objective, cfg, label=label)
    fidelity = objective.evaluate(params).fidelity
    _logger.info("%s finished with channel fidelity %.6f", label, fidelity)
    return TrainingResult(params, fidelity, trace)


# ===============================
# Logical CZ
# ===============================
# Composite register: [outer 1, inner 1, inner 2, outer 2]; qubit 2's rail order is mirrored.
QUBIT_MODES = ((0, 1), (3, 2))
INNER_RAILS = (1, 2)


@dataclass
class CzResult:
    fidelity: float
    logical_matrix: NDArray[np.complex128]  # <a~ b~| circuit |c~ d~>
    encoder_fidelity: float
    decoder_fidelity: float


def inner_rail_gate(
    amps: NDArray[np.complex128], mode_count: int, photon_number: int, nl: NonlinearParams
) -> NDArray[np.complex128]:
    """50:50 coupling of the inner rails, the nonlinearity on both, and the inverse coupling."""
    coupler = mzi_transfer(MziParams(np.pi / 2, 0.0))
    occ = enumerate_basis(mode_count, photon_number).array
    out = apply_kernel_array(amps, mode_count, photon_number, INNER_RAILS, coupler)
    phase = sum(nl_phase(occ[:, m], nl) for m in INNER_RAILS)
    out = out * np.exp(1j * phase)
    return apply_kernel_array(out, mode_count, photon_number, INNER_RAILS, coupler.conj().T)


def two_qubit_logical_basis(code: CodeSpec) -> List[FockState]:
    """|a~ b~> for ab = 00, 01, 10, 11 in the composite register layout."""
    order = (0, 1, 3, 2)
    return [
        permute_modes(tensor_product(a, b), order)
        for a in code.logical
        for b in code.logical
    ]


def run_logical_cz(
    code: CodeSpec,
    encoder: NetworkParams,
    decoder: NetworkParams,
    nl: NonlinearParams = NonlinearParams(0.0, np.pi),
    target: Optional[NDArray[np.complex128]] = None,
    min_encoder_fidelity: float = 0.999,
) -> CzResult:
    """
    Encode both qubits onto |N,0> / |N-1,1> rails, interact the inner rails
    through the nonlinearity and decode; fidelity against ``target``
    (default CZ) on the 4-dimensional logical space.
    """
    target = logical_gate_target("CZ") if target is None else np.asarray(target, dtype=np.complex128)
    encoder_fidelity = ChannelObjective(code.logical, np.eye(2), code.rail_states()).evaluate(encoder).fidelity
    decoder_fidelity = ChannelObjective(code.rail_states(), np.eye(2), code.logical).evaluate(decoder).fidelity
    for name, value in (("encoder", encoder_fidelity), ("decoder", decoder_fidelity)):
        if value < min_encoder_fidelity:
            _logger.warning("The %s reaches only %.6f on its rail map; it looks untrained.", name, value)

    basis_states = two_qubit_logical_basis(code)
    photon_number = 2 * code.photon_number
    inputs = np.array([s.sector(photon_number) for s in basis_states])
    out = inputs
    for modes in QUBIT_MODES:
        out = propagate(out, encoder, 4, photon_number, modes=modes)
    out = inner_rail_gate(out, 4, photon_number, nl)
    for modes in QUBIT_MODES:
        out = propagate(out, decoder, 4, photon_number, modes=modes)

    logical_matrix = inputs.conj() @ out.T
    fidelity = average_fidelity(np.trace(target.conj().T @ logical_matrix), 4)
    _logger.info("Logical CZ fidelity %.6f", fidelity)
    return CzResult(fidelity, logical_matrix, encoder_fidelity, decoder_fidelity)


def train_cz_rails(
    code: CodeSpec, encoder_layers: int, decoder_layers: int, cfg: TrainConfig, basis_cap: int = DEFAULT_BASIS_CAP
) -> Tuple[TrainingResult, TrainingResult]:
    """Encoder |0~> -> |N,0>, |1~> -> |N-1,1> and the decoder for the reverse map."""
    encoder = run_channel_prep(
        code.logical, np.eye(2), encoder_layers, cfg, code.rail_states(), basis_cap, label="cz-encoder"
    )
    decoder_cfg = cfg.model_copy(update={"seed": cfg.seed + 1})
    decoder = run_channel_prep(
        code.rail_states(), np.eye(2), decoder_layers, decoder_cfg, code.logical, basis_cap, label="cz-decoder"
    )
    return encoder, decoder


# ===============================
# Splitter-error Monte Carlo
# ===============================
@dataclass
class MonteCarloSummary:
    samples: NDArray[np.float64]
    ideal: float
    sigma: float

    @property
    def median(self) -> float:
        return float(np.median(self.samples))

    @property
    def minimum(self) -> float:
        return float(np.min(self.samples))

    @property
    def maximum(self) -> float:
        return float(np.max(self.samples))

    def to_dict(self) -> dict:
        return {
            "sigma": self.sigma,
            "samples": int(self.samples.size),
            "ideal_fidelity": self.ideal,
            "median_fidelity": self.median,
            "min_fidelity": self.minimum,
            "max_fidelity": self.maximum,
            "median_infidelity": 1.0 - self.median,
        }


def draw_network_errors(params: NetworkParams, sigma: float, seed: SeedLike):
    rng = np.random.default_rng(seed)
    return [sample_splitter_errors(mesh, sigma, rng) for mesh in params.meshes]


def _monte_carlo_chunk(args) -> List[float]:
    params, objective, sigma, seeds = args
    return [
        objective.evaluate(params, draw_network_errors(params, sigma, seed)).fidelity
        for seed in seeds
    ]


def splitter_monte_carlo(
    params: NetworkParams,
    objective: Objective,
    sigma: float,
    samples: int = 10000,
    seed: int = 0,
    workers: int = 1,
    progress: bool = False,
) -> MonteCarloSummary:
    """Fidelity of the frozen network under ``samples`` independent splitter-error draws."""
    if samples < 1:
        raise ValueError(f"samples must be at least 1, got {samples}")
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    ideal = objective.evaluate(params).fidelity
    seeds = spawn_seeds(seed, samples)
    chunk = max(1, math.ceil(samples / (4 * workers)))
    jobs = [(params, objective, sigma, seeds[k: k + chunk]) for k in range(0, samples, chunk)]
    _logger.info("Monte Carlo: %d samples at sigma=%g on %d worker(s)", samples, sigma, workers)
    if workers == 1:
        parts = [_monte_carlo_chunk(job) for job in tqdm(jobs, desc="monte-carlo", disable=not progress)]
    else:
        with Pool(processes=workers) as pool:
            parts = list(tqdm(pool.imap(_monte_carlo_chunk, jobs), total=len(jobs), desc="monte-carlo", disable=not progress))
    summary = MonteCarloSummary(np.array([f for part in parts for f in part]), ideal, sigma)
    _logger.info(
        "Monte Carlo: ideal %.6f, median %.6f, min %.6f, max %.6f",
        summary.ideal, summary.median, summary.minimum, summary.maximum,
    )
    return summary


# ===============================
# Routing gate and loss correction
# ===============================
class RoutingResult(NamedTuple):
    params: NetworkParams
    sector_fidelities: List[float]
    trace: TrainingTrace


def routing_objective(max_photons: int) -> MeanObjective:
    """Mean of |1, n> -> |0, n+1> over n = 0..max_photons."""
    return MeanObjective(
        [
            StateObjective(FockState.basis_state((1, n)), FockState.basis_state((0, n + 1)))
            for n in range(max_photons + 1)
        ]
    )


def train_routing_gate(max_photons: int, layers: int, cfg: TrainConfig) -> RoutingResult:
    objective = routing_objective(max_photons)
    params = NetworkParams.random(2, layers, seed=cfg.seed)
    params, trace = train(params, objective, cfg, label="routing-gate")
    fidelities = objective.fidelities(params)
    _logger.info("Routing gate sector fidelities: %s", ", ".join(f"{f:.6f}" for f in fidelities))
    return RoutingResult(params, fidelities, trace)


def routed_error_basis(code: CodeSpec, routing: NetworkParams, loss_mode: int, route_into: int = 0) -> List[FockState]:
    """Register states after a loss on ``loss_mode`` and routing, one per logical basis state."""
    modes = (ANCILLA, CODE_MODES[route_into])
    routed = []
    for logical in code.logical:
        damaged, _ = apply_loss(register_state(logical), CODE_MODES[loss_mode])
        routed.append(forward(damaged, routing, modes=modes))
    return routed


@dataclass
class PipelineTraining:
    pipeline: CorrectionPipeline
    routing: RoutingResult
    recovery_fidelities: Dict[int, float] = field(default_factory=dict)  # channel fidelity per loss location
    traces: Dict[str, TrainingTrace] = field(default_factory=dict)

    @property
    def recovery_channel_fidelity(self) -> float:
        """Mean over loss locations; at most SHARED_RECOVERY_LIMIT for a shared recovery."""
        return float(np.mean(list(self.recovery_fidelities.values()))) if self.recovery_fidelities else 0.0


def train_correction_pipeline(
    code: CodeSpec,
    routing_layers: int,
    recovery_layers: int,
    cfg: TrainConfig,
    loss_modes: Sequence[int] = (0, 1),
    route_into: int = 0,
    location_heralded: bool = False,
) -> PipelineTraining:
    """
    Train the routing gate on every photon number the refilled mode can hold,
    then one recovery mapping the routed error states of every loss location
    back onto the code.

    Losing a photon from either code mode leaves the same two error states
    with the logical labels swapped, so a shared recovery tops out at a mean
    channel fidelity of SHARED_RECOVERY_LIMIT. With ``location_heralded`` one
    recovery is trained per loss location instead, and the workflow picks it
    from the known location.
    """
    routing = train_routing_gate(code.photon_number - 1, routing_layers, cfg)
    pipeline = CorrectionPipeline(code, routing.params, route_into=route_into, location_heralded=location_heralded)
    result = PipelineTraining(pipeline, routing, traces={"routing": routing.trace})
    targets = [register_state(state, 0) for state in code.logical]

    objectives = {
        mode: ChannelObjective(
            routed_error_basis(code, routing.params, mode, route_into), np.eye(2), targets, modes=CODE_MODES
        )
        for mode in loss_modes
    }
    recovery_cfg = cfg.model_copy(update={"seed": cfg.seed + 1})
    if location_heralded:
        for mode, objective in objectives.items():
            initial = NetworkParams.random(2, recovery_layers, seed=recovery_cfg.seed + mode)
            params, trace = train(initial, objective, recovery_cfg, f"recovery-mode{mode}")
            pipeline.heralded[mode] = params
            result.traces[f"recovery_mode{mode}"] = trace
            result.recovery_fidelities[mode] = objective.evaluate(params).fidelity
    else:
        objective = MeanObjective(list(objectives.values()))
        params, trace = train(NetworkParams.random(2, recovery_layers, seed=recovery_cfg.seed), objective, recovery_cfg, "recovery")
        pipeline.recovery = params
        result.traces["recovery"] = trace
        result.recovery_fidelities = {mode: obj.evaluate(params).fidelity for mode, obj in objectives.items()}
    _logger.info(
        "Recovery channel fidelities: %s (mean %.6f)", result.recovery_fidelities, result.recovery_channel_fidelity
    )
    return result


@dataclass
class LossCorrectionReport:
    no_loss_fidelity: float
    per_location: Dict[int, dict]

    @property
    def mean_fidelity(self) -> float:
        values = [entry["fidelity"] for entry in self.per_location.values() if entry["fidelity"] is not None]
        return float(np.mean(values)) if values else 0.0

    def to_dict(self) -> dict:
        return {
            "no_loss_fidelity": self.no_loss_fidelity,
            "per_location": {str(k): v for k, v in self.per_location.items()},
            "mean_fidelity": self.mean_fidelity,
        }


def run_loss_correction_demo(
    pipeline: CorrectionPipeline,
    alpha: complex,
    beta: complex,
    loss_modes: Sequence[int] = (0, 1),
) -> LossCorrectionReport:
    """Run the no-loss branch and one branch per loss location through the correction workflow."""
    logical = pipeline.code.encode(alpha, beta)
    baseline = run_branch(pipeline, logical, None)
    per_location = {}
    for mode in loss_modes:
        outcome = run_branch(pipeline, logical, mode)
        per_location[mode] = {
            "syndrome": outcome["syndrome"],
            "action": outcome["action"],
            "branch_weight": outcome["branch_weight"],
            "fidelity": outcome["fidelity"],
        }
    report = LossCorrectionReport(baseline["fidelity"], per_location)
    _logger.info("Loss correction: mean recovered fidelity %.6f", report.mean_fidelity)
    return report
