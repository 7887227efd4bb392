import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import mlflow
from dotenv import load_dotenv
from pydantic import ValidationError

# Add current directory to Python path so `app` resolves when run from elsewhere
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from app.artifacts import ensure_out_dir, load_checkpoint, save_checkpoint, write_csv, write_json
from app.config import ExperimentConfig, task_catalog
from app.definitions import DEFAULT_OUT_DIR, EXPERIMENT_NAME, LOG_FORMAT, REMOTE_SERVER_URI, SHARED_RECOVERY_LIMIT
from app.errors import BasisSizeError, DivergenceError, GridResolutionError
from app.fock import check_basis_size, enumerate_basis
from app.network import NetworkParams
from app.optimizer import StateObjective, TrainingTrace
from app.scattering import SWEEP_COLUMNS, run_sweep
from app.tasks import (
    binomial_code,
    channel_task,
    make_noon_state,
    named_seed,
    run_channel_prep,
    run_logical_cz,
    run_loss_correction_demo,
    run_state_prep,
    sample_haar_state,
    single_photon_input,
    splitter_monte_carlo,
    train_correction_pipeline,
    train_cz_rails,
    train_routing_gate,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INVALID_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_RESOURCE_GUARD = 4

# ===============================
# Logger Setup
# ===============================
_logger = logging.getLogger(__name__)
_logger.setLevel(logging.INFO)
if not _logger.handlers:
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    _logger.addHandler(handler)


@dataclass
class RunOutput:
    results: dict
    traces: Dict[str, TrainingTrace] = field(default_factory=dict)
    networks: Dict[str, NetworkParams] = field(default_factory=dict)  # first entry is the primary network
    tables: Dict[str, Tuple[List[dict], List[str]]] = field(default_factory=dict)  # file name -> (rows, columns)


# ===============================
# Task runners
# ===============================
def _state_prep_pair(params, config: ExperimentConfig):
    """(input, target) of a state-preparation style task."""
    input_state = single_photon_input(params.photons, params.modes)
    if params.target == "noon":
        return input_state, make_noon_state(params.photons, tuple(params.noon_pair), params.modes)
    check_basis_size(params.modes, params.photons, config.basis_cap)
    seed = params.target_seed if params.target_seed is not None else named_seed(config.seed, "haar-target")
    return input_state, sample_haar_state(enumerate_basis(params.modes, params.photons), seed)


def run_state_prep_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    input_state, target = _state_prep_pair(p, config)
    result = run_state_prep(target, input_state, p.layers, config.train, config.basis_cap)
    return RunOutput(
        results={"final_fidelity": result.fidelity, "iterations": len(result.trace)},
        traces={"state-prep": result.trace},
        networks={"network": result.params},
    )


def run_channel_prep_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    code = binomial_code(p.code_photons)
    code_in, target, code_out = channel_task(code, p.gate)
    result = run_channel_prep(
        code_in, target, p.layers, config.train, code_out, config.basis_cap, label=f"channel-prep-{p.gate}"
    )
    return RunOutput(
        results={"final_fidelity": result.fidelity, "gate": p.gate, "iterations": len(result.trace)},
        traces={p.gate: result.trace},
        networks={"network": result.params},
    )


def run_logical_cz_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    code = binomial_code(p.code_photons)
    check_basis_size(4, 2 * code.photon_number, config.basis_cap)
    encoder, decoder = train_cz_rails(code, p.encoder_layers, p.decoder_layers, config.train, config.basis_cap)
    cz = run_logical_cz(code, encoder.params, decoder.params, min_encoder_fidelity=p.min_encoder_fidelity)
    return RunOutput(
        results={
            "final_fidelity": cz.fidelity,
            "encoder_fidelity": cz.encoder_fidelity,
            "decoder_fidelity": cz.decoder_fidelity,
            "logical_matrix": cz.logical_matrix,
        },
        traces={"encoder": encoder.trace, "decoder": decoder.trace},
        networks={"encoder": encoder.params, "decoder": decoder.params},
    )


def run_monte_carlo_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    input_state, target = _state_prep_pair(p, config)
    output = RunOutput(results={})
    if p.checkpoint:
        _logger.info("Loading network from %s", p.checkpoint)
        params = load_checkpoint(p.checkpoint)
    else:
        trained = run_state_prep(target, input_state, p.layers, config.train, config.basis_cap)
        params = trained.params
        output.traces["state-prep"] = trained.trace
    summary = splitter_monte_carlo(
        params,
        StateObjective(input_state, target),
        p.sigma,
        p.samples,
        seed=config.seed,
        workers=config.workers or 1,
        progress=config.train.progress,
    )
    output.results = summary.to_dict()
    output.networks["network"] = params
    output.tables["samples.csv"] = (
        [{"sample": k, "fidelity": float(f)} for k, f in enumerate(summary.samples)],
        ["sample", "fidelity"],
    )
    return output


def run_routing_gate_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    result = train_routing_gate(p.max_photons, p.layers, config.train)
    return RunOutput(
        results={
            "sector_fidelities": {str(n): f for n, f in enumerate(result.sector_fidelities)},
            "final_fidelity": min(result.sector_fidelities),
        },
        traces={"routing": result.trace},
        networks={"network": result.params},
    )


def run_loss_correction_task(config: ExperimentConfig) -> RunOutput:
    p = config.params
    code = binomial_code(p.code_photons)
    training = train_correction_pipeline(
        code,
        p.routing_layers,
        p.recovery_layers,
        config.train,
        p.loss_modes,
        p.route_into,
        p.location_heralded,
    )
    report = run_loss_correction_demo(training.pipeline, p.alpha, p.beta, p.loss_modes)
    pipeline = training.pipeline
    networks = {"routing": pipeline.routing}
    if pipeline.recovery is not None:
        networks["recovery"] = pipeline.recovery
    networks.update({f"recovery_mode{m}": net for m, net in sorted(pipeline.heralded.items())})
    results = {
        "recovery": "heralded" if pipeline.location_heralded else "shared",
        "recovery_channel_fidelity": training.recovery_channel_fidelity,
    }
    if not pipeline.location_heralded:
        results["shared_recovery_limit"] = SHARED_RECOVERY_LIMIT
    results.update(report.to_dict())
    results["routing_sector_fidelities"] = training.routing.sector_fidelities
    results["recovery_channel_fidelities"] = {str(m): f for m, f in training.recovery_fidelities.items()}
    return RunOutput(results=results, traces=training.traces, networks=networks)


def run_scattering_sweep_task(config: ExperimentConfig) -> RunOutput:
    rows = run_sweep(config.params, workers=config.workers or 1, progress=config.train.progress)
    worst = min(rows, key=lambda r: r["fidelity"])
    deltas = [r["richardson_delta"] for r in rows if r["richardson_delta"] != ""]
    return RunOutput(
        results={
            "rows": len(rows),
            "min_fidelity": worst["fidelity"],
            "min_fidelity_row": worst,
            "max_fidelity": max(r["fidelity"] for r in rows),
            "max_richardson_delta": max(deltas) if deltas else None,
        },
        tables={"sweep.csv": (rows, SWEEP_COLUMNS)},
    )


TASK_RUNNERS: Dict[str, Callable[[ExperimentConfig], RunOutput]] = {
    "state-prep": run_state_prep_task,
    "channel-prep": run_channel_prep_task,
    "logical-cz": run_logical_cz_task,
    "monte-carlo": run_monte_carlo_task,
    "routing-gate": run_routing_gate_task,
    "loss-correction": run_loss_correction_task,
    "scattering-sweep": run_scattering_sweep_task,
}


# ===============================
# Artifacts and tracking
# ===============================
def _trace_table(traces: Dict[str, TrainingTrace]) -> Tuple[List[dict], List[str]]:
    """All training traces of a run stacked into one table with a ``stage`` column."""
    columns = ["stage"]
    rows = []
    for stage, trace in traces.items():
        columns += [c for c in trace.columns() if c not in columns]
        rows += [{"stage": stage, **row} for row in trace.rows()]
    return rows, columns


def write_run_files(config: ExperimentConfig, output: RunOutput, out_dir: Path) -> List[Path]:
    written = []
    summary = {
        "success": True,
        "task": config.task,
        "config": config.model_dump(exclude={"out_dir", "workers", "track"}),
        "results": output.results,
    }
    write_json(out_dir / "summary.json", summary, _logger)
    written.append(out_dir / "summary.json")
    if output.traces:
        rows, columns = _trace_table(output.traces)
        write_csv(out_dir / "trace.csv", rows, columns, _logger)
        written.append(out_dir / "trace.csv")
    if output.networks:
        save_checkpoint(out_dir / "checkpoint.json", output.networks, _logger)
        written.append(out_dir / "checkpoint.json")
    for name, (rows, columns) in output.tables.items():
        write_csv(out_dir / name, rows, columns, _logger)
        written.append(out_dir / name)
    return written


def _numeric_results(results: dict, prefix: str = "") -> Dict[str, float]:
    metrics = {}
    for key, value in results.items():
        if isinstance(value, dict):
            metrics.update(_numeric_results(value, f"{prefix}{key}."))
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            metrics[f"{prefix}{key}"] = float(value)
    return metrics


def track_run(config: ExperimentConfig, output: RunOutput, files: List[Path], duration: float) -> None:
    """Log parameters, training curves, final metrics and result files to MLflow."""
    mlflow.set_tracking_uri(os.getenv("MLFLOW_TRACKING_URI", REMOTE_SERVER_URI))
    mlflow.set_experiment(EXPERIMENT_NAME)
    with mlflow.start_run(run_name=f"{config.task}_seed{config.seed}"):
        mlflow.log_param("task", config.task)
        mlflow.log_param("seed", config.seed)
        mlflow.log_params({f"params.{k}": str(v) for k, v in config.params.model_dump().items()})
        mlflow.log_params({f"train.{k}": v for k, v in config.train.model_dump().items()})
        for stage, trace in output.traces.items():
            for step, (value, fid) in enumerate(zip(trace.loss, trace.fidelity)):
                mlflow.log_metrics({f"{stage}.loss": value, f"{stage}.fidelity": fid}, step=step)
        mlflow.log_metrics(_numeric_results(output.results))
        mlflow.log_metric("duration_seconds", duration)
        for path in files:
            mlflow.log_artifact(str(path))


# ===============================
# Entry point
# ===============================
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Train and evaluate photonic quantum neural networks.")
    parser.add_argument("config", nargs="?", help="Path to a JSON experiment configuration")
    parser.add_argument("--seed", type=int, help="Override the root seed")
    parser.add_argument("--workers", type=int, help="Worker processes (default: all cores)")
    parser.add_argument("--out-dir", help="Directory for trace.csv, summary.json and checkpoint.json")
    parser.add_argument("--track", action="store_true", help="Log the run to MLflow")
    parser.add_argument("--list-tasks", action="store_true", help="Print task ids with parameter schemas and exit")
    return parser


def load_config(path: str, args: Optional[argparse.Namespace] = None) -> ExperimentConfig:
    """Read the JSON file, apply command-line overrides, and validate."""
    with open(path) as handle:
        record = json.load(handle)
    if not isinstance(record, dict):
        raise ValueError(f"{path} must hold a JSON object, got {type(record).__name__}")
    if args is not None:
        for key in ("seed", "workers", "out_dir"):
            value = getattr(args, key, None)
            if value is not None:
                record[key] = value
        if getattr(args, "track", False):
            record["track"] = True
    config = ExperimentConfig.model_validate(record)
    train = config.train
    if "seed" not in train.model_fields_set:
        # Initial parameters follow the root seed unless the file pins train.seed.
        train = train.model_copy(update={"seed": int(named_seed(config.seed, "initial-params").generate_state(1)[0])})
    return config.model_copy(update={"train": train, "workers": config.workers or os.cpu_count() or 1})


def _fail(error: Exception, exit_code: int, out_dir: Path) -> int:
    record = {
        "success": False,
        "error": str(error),
        "error_type": type(error).__name__,
        "exit_code": exit_code,
    }
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    try:
        write_json(ensure_out_dir(str(out_dir), _logger) / "error.json", record, _logger)
    except OSError as e:
        _logger.error("Could not write the error record: %s", e)
    return exit_code


def run_experiment(config: ExperimentConfig) -> RunOutput:
    out_dir = ensure_out_dir(config.out_dir, _logger)
    _logger.info("Running %s with seed %d into %s", config.task, config.seed, out_dir)
    start_time = time.time()
    output = TASK_RUNNERS[config.task](config)
    duration = time.time() - start_time
    files = write_run_files(config, output, out_dir)
    _logger.info("%s finished in %.1f s", config.task, duration)
    if config.track:
        try:
            track_run(config, output, files, duration)
        except Exception as e:
            _logger.warning("MLflow tracking failed: %s", str(e))
    return output


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one experiment. Exit codes: 0 success, 2 invalid configuration,
    3 numeric divergence, 4 basis size over the cap, 1 anything else.
    """
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_tasks:
        print(json.dumps(task_catalog(), indent=2, sort_keys=True))
        return EXIT_OK
    if args.config is None:
        parser.print_usage(sys.stderr)
        return _fail(ValueError("a configuration file is required"), EXIT_INVALID_CONFIG, Path(args.out_dir or DEFAULT_OUT_DIR))

    try:
        config = load_config(args.config, args)
    except (OSError, ValueError, ValidationError) as e:
        _logger.error("Invalid configuration %s: %s", args.config, e)
        return _fail(e, EXIT_INVALID_CONFIG, Path(args.out_dir or DEFAULT_OUT_DIR))

    out_dir = Path(config.out_dir)
    try:
        run_experiment(config)
    except DivergenceError as e:
        _logger.error("Training diverged: %s", e)
        return _fail(e, EXIT_DIVERGENCE, out_dir)
    except BasisSizeError as e:
        _logger.error("Resource guard: %s", e)
        return _fail(e, EXIT_RESOURCE_GUARD, out_dir)
    except GridResolutionError as e:
        _logger.error("Scattering grid rejected: %s", e)
        return _fail(e, EXIT_INVALID_CONFIG, out_dir)
    except Exception as e:
        _logger.exception("Experiment failed")
        return _fail(e, EXIT_FAILURE, out_dir)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
