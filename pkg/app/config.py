"""Experiment configuration schemas."""

import math
from typing import Any, Dict, List, Literal, Optional, Tuple, Type

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.definitions import DEFAULT_BASIS_CAP, DEFAULT_OUT_DIR


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TrainConfig(_Strict):
    """Adam with a learning rate annealed linearly from lr_start to lr_end."""
    iterations: int = Field(default=2000, ge=1, description="Number of Adam steps")
    lr_start: float = Field(default=0.025, gt=0, description="Learning rate at the first iteration")
    lr_end: float = Field(default=0.001, gt=0, description="Learning rate at the last iteration")
    beta1: float = Field(default=0.9, ge=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(default=0.999, ge=0, lt=1, description="Adam second-moment decay")
    eps: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
    seed: int = Field(default=0, description="Seed for the initial network parameters")
    gradient: Literal["analytic", "central"] = Field(
        default="analytic", description="Adjoint gradient or central finite differences"
    )
    fd_step: float = Field(default=1e-5, gt=0, description="Step h of the central-difference gradient")
    log_every: int = Field(default=100, ge=1, description="Log loss and fidelity every this many iterations")
    record_projections: bool = Field(
        default=False, description="Record |amplitude| of each output basis element per iteration"
    )
    progress: bool = Field(default=False, description="Show a progress bar")

    @model_validator(mode="after")
    def _check_schedule(self):
        if self.lr_end > self.lr_start:
            raise ValueError(f"lr_end ({self.lr_end}) must not exceed lr_start ({self.lr_start})")
        return self

    def learning_rate(self, iteration: int) -> float:
        if self.iterations == 1:
            return self.lr_start
        return self.lr_start + (self.lr_end - self.lr_start) * iteration / (self.iterations - 1)


class StatePrepParams(_Strict):
    target: Literal["haar", "noon"] = Field(default="haar", description="Target family")
    photons: int = Field(default=2, ge=1, description="Photon number N; the input fills the first N modes")
    modes: int = Field(default=4, ge=2, description="Mode count M")
    layers: int = Field(default=4, ge=1, description="Network depth L")
    target_seed: Optional[int] = Field(default=None, description="Seed of the Haar target (default: root seed)")
    noon_pair: Tuple[int, int] = Field(default=(0, 1), description="Modes carrying the N00N state")


class ChannelPrepParams(_Strict):
    code_photons: int = Field(default=3, ge=2, description="Binomial-code order N (2N-1 photons)")
    gate: Literal["encode", "identity", "H", "S", "T", "X", "Z"] = Field(
        default="encode", description="Map to learn: the encoder, or a logical gate on the code"
    )
    layers: int = Field(default=4, ge=1, description="Network depth L")


class LogicalCzParams(_Strict):
    code_photons: int = Field(default=3, ge=2, description="Binomial-code order N")
    encoder_layers: int = Field(default=5, ge=1, description="Depth of each encoder")
    decoder_layers: int = Field(default=5, ge=1, description="Depth of each decoder")
    min_encoder_fidelity: float = Field(
        default=0.999, ge=0, le=1, description="Warn when an encoder or decoder trains below this"
    )


class MonteCarloParams(_Strict):
    target: Literal["noon", "haar"] = Field(default="noon", description="State-preparation target")
    photons: int = Field(default=4, ge=1, description="Photon number N")
    modes: int = Field(default=4, ge=2, description="Mode count M")
    layers: int = Field(default=3, ge=1, description="Network depth L")
    sigma: float = Field(default=0.01, ge=0, description="Std. dev. of splitter deviations alpha, beta")
    samples: int = Field(default=10000, ge=1, description="Number of splitter-error draws")
    checkpoint: Optional[str] = Field(
        default=None, description="Network checkpoint to evaluate; trained from scratch if omitted"
    )


class RoutingGateParams(_Strict):
    max_photons: int = Field(default=4, ge=0, description="Train |1,n> -> |0,n+1> for n = 0..max_photons")
    layers: int = Field(default=5, ge=1, description="Network depth L")


class LossCorrectionParams(_Strict):
    code_photons: int = Field(default=2, ge=2, description="Binomial-code order N")
    routing_layers: int = Field(default=5, ge=1, description="Depth of the routing gate")
    recovery_layers: int = Field(default=3, ge=1, description="Depth of the recovery network")
    alpha: float = Field(default=1 / math.sqrt(2), description="Logical amplitude on |0~>")
    beta: float = Field(default=1 / math.sqrt(2), description="Logical amplitude on |1~>")
    loss_modes: List[int] = Field(default=[0, 1], description="Code modes (0 or 1) on which a photon is lost")
    route_into: int = Field(default=0, ge=0, le=1, description="Code mode receiving the ancilla photon")
    location_heralded: bool = Field(
        default=False,
        description="Train one recovery per loss location and select it from a heralded loss location; "
        "the default shares one recovery, since the syndrome does not reveal where the photon was lost",
    )

    @model_validator(mode="after")
    def _check(self):
        if not self.loss_modes or any(m not in (0, 1) for m in self.loss_modes):
            raise ValueError(f"loss_modes must be a non-empty subset of [0, 1], got {self.loss_modes}")
        if self.alpha == 0 and self.beta == 0:
            raise ValueError("alpha and beta cannot both be zero")
        return self


class ScatteringSweepParams(_Strict):
    sigma_over_g: List[float] = Field(default=[1.0], description="Pulse FWHM in units of g")
    kappa_over_g: List[float] = Field(default=[1.0], description="Cavity decay rate in units of g")
    phi1: List[float] = Field(
        default=[2 * math.pi * k / 12 for k in range(12)], description="Phase on the subtracted photon"
    )
    phi2: List[float] = Field(default=[0.0], description="Phase on each remaining photon")
    step: Optional[float] = Field(default=None, gt=0, description="Time step in units of 1/g (default: automatic)")
    richardson: bool = Field(default=True, description="Re-solve at half the step and report the change")


TASK_PARAMS: Dict[str, Type[BaseModel]] = {
    "state-prep": StatePrepParams,
    "channel-prep": ChannelPrepParams,
    "logical-cz": LogicalCzParams,
    "monte-carlo": MonteCarloParams,
    "routing-gate": RoutingGateParams,
    "loss-correction": LossCorrectionParams,
    "scattering-sweep": ScatteringSweepParams,
}

TaskId = Literal[
    "state-prep",
    "channel-prep",
    "logical-cz",
    "monte-carlo",
    "routing-gate",
    "loss-correction",
    "scattering-sweep",
]


class ExperimentConfig(_Strict):
    task: TaskId = Field(default="state-prep", description="Experiment to run")
    params: Any = Field(default=None, description="Task parameters; schema depends on task")
    train: TrainConfig = Field(default_factory=TrainConfig, description="Optimizer settings")
    out_dir: str = Field(default=DEFAULT_OUT_DIR, description="Directory for trace, summary and checkpoint")
    seed: int = Field(default=0, description="Root seed; every random stream is split from it")
    basis_cap: int = Field(default=DEFAULT_BASIS_CAP, ge=1, description="Largest Fock basis allowed")
    workers: Optional[int] = Field(default=None, ge=1, description="Worker processes (default: all cores)")
    track: bool = Field(default=False, description="Log the run to MLflow")

    @model_validator(mode="before")
    @classmethod
    def _validate_params(cls, data):
        if not isinstance(data, dict):
            return data
        task = data.get("task", "state-prep")
        schema = TASK_PARAMS.get(task)
        if schema is not None:
            data = dict(data)
            data["params"] = schema.model_validate(data.get("params") or {})
        return data


def task_catalog() -> Dict[str, dict]:
    """JSON schema of every task's parameters, keyed by task id."""
    return {task: schema.model_json_schema() for task, schema in TASK_PARAMS.items()}
