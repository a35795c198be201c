import json
import logging
import math
import os
import sys
from pathlib import Path
from typing import Dict, Optional, Union

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] %(name)s: %(message)s"


def init_logging(verbose: bool = False) -> None:
    """
    One stderr handler on the root logger; library modules log through
    `logging.getLogger(__name__)`. Calling it again replaces the handler.
    """
    level = logging.DEBUG if verbose else logging.INFO
    root = logging.getLogger()
    root.setLevel(level)
    for h in list(root.handlers):
        root.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, "%H:%M:%S"))
    handler.setLevel(level)
    root.addHandler(handler)

    logging.getLogger("PIL").setLevel(logging.WARNING)


def _jsonable(value):
    """NaN/inf become None so the file stays valid JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


def save_result(result: Dict, file_path: Union[str, Path], run_name: str, tot_time: Optional[float] = None) -> None:
    """
    Save a command's result to a JSON file under a run key (e.g. 'reconstruct_seed0').
    If the file exists, update or add the run.

    Args:
        result (dict): Metrics, paths and counts to store.
        file_path (str): Path to the JSON file.
        run_name (str): Key of this run in the JSON file.
        tot_time (float, optional): Wall-clock seconds of the run.
    """
    entry = dict(result)
    if tot_time is not None:
        entry["time"] = round(float(tot_time), 3)

    data = {}
    if os.path.exists(file_path):
        with open(file_path, "r") as infile:
            try:
                data = json.load(infile)
                if not isinstance(data, dict):
                    data = {}
            except json.JSONDecodeError:
                data = {}

    data[run_name] = _jsonable(entry)

    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w") as outfile:
        json.dump(data, outfile, indent=4)
    print(f"Saved under '{run_name}' to {file_path}")


def load_results(file_path: Union[str, Path]) -> Dict:
    if not os.path.isfile(file_path):
        return {}
    try:
        with open(file_path, "r") as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError):
        return {}
    return data if isinstance(data, dict) else {}


def ensure_dir(path: Union[str, Path]) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
