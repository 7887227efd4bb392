import argparse
import os

import mlflow
from dotenv import load_dotenv

from app.artifacts import load_checkpoint
from app.definitions import (
    EXPERIMENT_NAME,
    REGISTERED_MODEL_NAME,
    MODEL_ALIAS,
    REMOTE_SERVER_URI
)
from app.fock import FockState
from app.network_model import PhotonicNetwork

load_dotenv()

parser = argparse.ArgumentParser(description="Log a trained network checkpoint and register it in MLflow.")
parser.add_argument("checkpoint", help="checkpoint.json written by main.py")
args = parser.parse_args()

# Fail early on a malformed checkpoint
params = load_checkpoint(args.checkpoint)

tracking_uri = os.getenv("MLFLOW_TRACKING_URI", REMOTE_SERVER_URI)
mlflow.set_tracking_uri(tracking_uri)
mlflow.set_experiment(EXPERIMENT_NAME)

with mlflow.start_run():
    # A vacuum-padded single photon is a valid input for any network size
    input_example = [FockState.basis_state([1] + [0] * (params.mode_count - 1)).to_dict()]
    logged_model_info = mlflow.pyfunc.log_model(
        name="photonic_network",
        python_model=PhotonicNetwork(),
        artifacts={"checkpoint": args.checkpoint},
        input_example=input_example,
    )
    mlflow.log_params({"M": params.mode_count, "L": params.layer_count})

# Register the logged model artifact under the registered model name
registered_mv = mlflow.register_model(logged_model_info.model_uri, REGISTERED_MODEL_NAME)

client = mlflow.tracking.MlflowClient(tracking_uri=tracking_uri)
client.set_registered_model_alias(
    REGISTERED_MODEL_NAME,
    MODEL_ALIAS,
    registered_mv.version
)

print("Model registered successfully!")
print(f"Model Name: {REGISTERED_MODEL_NAME}, Alias: {MODEL_ALIAS}, Version: {registered_mv.version}")
