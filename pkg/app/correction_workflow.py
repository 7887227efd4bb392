import logging
from dataclasses import dataclass, field
from typing import Dict, Optional
from typing_extensions import TypedDict

from langgraph.graph import END, START, StateGraph

from app.codes import CodeSpec
from app.definitions import LOG_FORMAT
from app.fock import FockState, apply_loss, tensor_product, total_photon_number
from app.network import NetworkParams, forward
from app.optimizer import state_fidelity

# Set up module logger
_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
if not _logger.handlers:
    _handler = logging.StreamHandler()
    _handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _logger.addHandler(_handler)

# Register layout: mode 0 is the ancilla, modes 1 and 2 carry the code.
ANCILLA = 0
CODE_MODES = (1, 2)

NO_LOSS = "none"
ROUTE = "route"
UNCORRECTABLE = "uncorrectable"


def syndrome_action(photon_count: int, code: CodeSpec) -> str:
    """
    Map the measured code photon number onto an action via
    p = n mod (2N - 1): p = 0 means no loss, p = 2N - 2 a single loss.
    """
    if photon_count <= 0:
        return UNCORRECTABLE
    parity = photon_count % code.photon_number
    if parity == 0:
        return NO_LOSS
    if parity == code.photon_number - 1:
        return ROUTE
    return UNCORRECTABLE


@dataclass
class CorrectionPipeline:
    """
    The syndrome tells that a photon was lost, not where, so every routed
    branch goes through the one shared ``recovery``. ``heralded`` networks,
    keyed by lost code mode, are only used when ``location_heralded`` says the
    loss location is known from outside the syndrome.
    """

    code: CodeSpec
    routing: NetworkParams
    recovery: Optional[NetworkParams] = None
    route_into: int = 0
    heralded: Dict[int, NetworkParams] = field(default_factory=dict)
    location_heralded: bool = False

    def recovery_for(self, heralded_mode: Optional[int] = None) -> NetworkParams:
        if heralded_mode is None:
            if self.recovery is None:
                raise KeyError("no shared recovery network trained")
            return self.recovery
        if heralded_mode not in self.heralded:
            raise KeyError(f"no recovery network trained for a heralded loss on code mode {heralded_mode}")
        return self.heralded[heralded_mode]

    @property
    def routing_modes(self):
        return (ANCILLA, CODE_MODES[self.route_into])


def register_state(code_state: FockState, ancilla_photons: int = 1) -> FockState:
    """Ancilla mode followed by the two code modes."""
    return tensor_product(FockState.basis_state((ancilla_photons,)), code_state)


class CorrectionState(TypedDict):
    state: FockState  # Three-mode register, updated by each node
    reference: FockState  # Logical state the register should end up in (code modes only)
    loss_mode: Optional[int]  # Code mode that loses a photon; None for the no-loss branch
    branch_weight: float  # Probability weight of the loss branch
    syndrome: int  # Measured photon number on the code modes
    action: str  # none | route | uncorrectable
    fidelity: Optional[float]  # Fidelity of the final register with the reference


def get_correction_workflow(pipeline: CorrectionPipeline):
    """Define and compile the loss -> syndrome -> routing -> recovery graph."""

    def lose_photon(state: CorrectionState) -> CorrectionState:
        """Annihilate one photon in the chosen code mode."""
        loss_mode = state.get("loss_mode")
        if loss_mode is None:
            _logger.info("No-loss branch, register left untouched.")
            state["branch_weight"] = 1.0
            return state
        register, weight = apply_loss(state["state"], CODE_MODES[loss_mode])
        _logger.info("Photon lost from code mode %d (branch weight %.4f).", loss_mode, weight)
        state["state"] = register
        state["branch_weight"] = weight
        return state

    def measure_syndrome(state: CorrectionState) -> CorrectionState:
        """Non-demolition photon count on the code modes."""
        distribution = total_photon_number(state["state"], CODE_MODES)
        if len(distribution) != 1:
            _logger.warning("Code photon number is not sharp: %s", distribution)
        count = max(distribution, key=distribution.get) if distribution else 0
        state["syndrome"] = count
        state["action"] = syndrome_action(count, pipeline.code)
        _logger.info("Syndrome: %d photons in the code modes -> %s", count, state["action"])
        return state

    def route(state: CorrectionState) -> CorrectionState:
        """Move the ancilla photon into the code."""
        _logger.info("Routing the ancilla photon into code mode %d.", pipeline.route_into)
        state["state"] = forward(state["state"], pipeline.routing, modes=pipeline.routing_modes)
        return state

    def recover(state: CorrectionState) -> CorrectionState:
        """Rotate the refilled code state back onto the logical state."""
        heralded_mode = state["loss_mode"] if pipeline.location_heralded else None
        if heralded_mode is None:
            _logger.info("Applying the shared recovery layers.")
        else:
            _logger.info("Applying the recovery layers for a heralded loss on code mode %d.", heralded_mode)
        network = pipeline.recovery_for(heralded_mode)
        state["state"] = forward(state["state"], network, modes=CODE_MODES)
        return state

    def score(state: CorrectionState) -> CorrectionState:
        """Fidelity against the reference with the ancilla in its expected state."""
        ancilla_photons = 0 if state["action"] == ROUTE else 1
        expected = register_state(state["reference"], ancilla_photons)
        state["fidelity"] = state_fidelity(state["state"], expected)
        _logger.info("Recovered-state fidelity: %.6f", state["fidelity"])
        return state

    def decide_next_step(state: CorrectionState) -> str:
        if state["action"] == ROUTE:
            return "route"
        if state["action"] == NO_LOSS:
            return "score"
        _logger.warning("Syndrome %d is outside the correctable set. Ending the workflow.", state["syndrome"])
        return END

    workflow = StateGraph(CorrectionState)
    workflow.add_node("lose_photon", lose_photon)
    workflow.add_node("measure_syndrome", measure_syndrome)
    workflow.add_node("route", route)
    workflow.add_node("recover", recover)
    workflow.add_node("score", score)

    workflow.add_edge(START, "lose_photon")
    workflow.add_edge("lose_photon", "measure_syndrome")
    workflow.add_conditional_edges(
        "measure_syndrome",
        decide_next_step,
        {"route": "route", "score": "score", END: END},
    )
    workflow.add_edge("route", "recover")
    workflow.add_edge("recover", "score")
    workflow.add_edge("score", END)

    return workflow.compile()


def run_branch(pipeline: CorrectionPipeline, logical: FockState, loss_mode: Optional[int]) -> CorrectionState:
    """Push |1>_ancilla (x) ``logical`` through one loss branch of the workflow."""
    app = get_correction_workflow(pipeline)
    initial: CorrectionState = {
        "state": register_state(logical),
        "reference": logical,
        "loss_mode": loss_mode,
        "branch_weight": 1.0,
        "syndrome": -1,
        "action": "",
        "fidelity": None,
    }
    return app.invoke(initial)
