import json
from typing import Any, Dict, List, Optional

import mlflow

from app.fock import FockState
from app.network import NetworkParams, forward


class PhotonicNetwork(mlflow.pyfunc.PythonModel):
    """Serve a trained network: Fock-state records in, output Fock-state records out."""

    def __init__(self, checkpoint: Optional[dict] = None):
        self._params = NetworkParams.from_checkpoint(checkpoint) if checkpoint is not None else None

    def load_context(self, context: Any) -> None:
        if self._params is None and "checkpoint" in context.artifacts:
            with open(context.artifacts["checkpoint"]) as handle:
                record = json.load(handle)
            self._params = NetworkParams.from_checkpoint(record.get("network", record))

    @property
    def params(self) -> NetworkParams:
        if self._params is None:
            raise RuntimeError("no network loaded; pass a checkpoint or log one as the 'checkpoint' artifact")
        return self._params

    def predict(self, context: Any, model_input: List[Dict[str, Any]]) -> List[Dict[str, Any]]:
        """
        context: MLflow runtime context
        model_input: list of Fock-state records ({mode_count, photon_number, amplitudes})
        Returns one output record per input.
        """
        if hasattr(model_input, "to_dict"):
            model_input = model_input.to_dict("records")
        outputs = []
        for record in model_input:
            state = FockState.from_dict(record)
            if state.mode_count != self.params.mode_count:
                raise ValueError(f"network acts on {self.params.mode_count} modes, input has {state.mode_count}")
            outputs.append(forward(state, self.params).to_dict())
        return outputs
