import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Iterable, List, Mapping, Optional

import numpy as np

from app.network import NetworkParams


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return [_plain(value.real), _plain(value.imag)]
    if isinstance(value, float) and not math.isfinite(value):
        return repr(value)
    return value


def ensure_out_dir(out_dir: str, logger: Optional[logging.Logger] = None) -> Path:
    if logger is None:
        logger = logging.getLogger(__name__)
    path = Path(out_dir)
    if not path.exists():
        logger.info("Creating output directory %s", path)
        path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, record: Mapping, logger: Optional[logging.Logger] = None) -> dict:
    """Write ``record`` with sorted keys so identical runs give identical files."""
    if logger is None:
        logger = logging.getLogger(__name__)
    try:
        with open(path, "w") as handle:
            json.dump(_plain(record), handle, indent=2, sort_keys=True)
            handle.write("\n")
    except OSError as e:
        logger.error("Could not write %s: %s", path, e)
        return {"success": False, "error": str(e)}
    logger.info("Wrote %s", path)
    return {"success": True, "message": f"Wrote {path}"}


def write_csv(
    path: Path, rows: Iterable[Mapping], columns: List[str], logger: Optional[logging.Logger] = None
) -> dict:
    """Floats are written with repr so the file round-trips exactly."""
    if logger is None:
        logger = logging.getLogger(__name__)
    try:
        with open(path, "w", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v for k, v in row.items()})
    except OSError as e:
        logger.error("Could not write %s: %s", path, e)
        return {"success": False, "error": str(e)}
    logger.info("Wrote %s", path)
    return {"success": True, "message": f"Wrote {path}"}


def save_checkpoint(
    path: Path, networks: Mapping[str, NetworkParams], logger: Optional[logging.Logger] = None
) -> dict:
    """
    Write every trained network under ``networks``; the first one is repeated
    as ``network`` so single-network readers find it.
    """
    if not networks:
        raise ValueError("a checkpoint needs at least one network")
    primary = next(iter(networks.values()))
    record = {
        "network": primary.to_checkpoint(),
        "networks": {name: params.to_checkpoint() for name, params in networks.items()},
    }
    return write_json(path, record, logger)


def load_checkpoint(path: str, name: Optional[str] = None) -> NetworkParams:
    """Read a network checkpoint: the primary network, or the one stored under ``name``."""
    with open(path) as handle:
        record = json.load(handle)
    if name is not None:
        networks = record.get("networks", {})
        if name not in networks:
            raise KeyError(f"no network {name!r} in {path}; stored: {sorted(networks)}")
        return NetworkParams.from_checkpoint(networks[name])
    if "params" not in record and "network" in record:
        record = record["network"]
    return NetworkParams.from_checkpoint(record)
