"""
Artifact writers: deterministic JSON and CSV outputs
"""
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger

FLOAT_FORMAT = "%.10g"

PathLike = Union[str, Path]


def normalize(value: Any) -> Any:
    """JSON-safe copy with floats rounded to 10 significant digits and non-finite values as null"""
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set)):
        items = sorted(value) if isinstance(value, set) else value
        return [normalize(v) for v in items]
    if isinstance(value, np.ndarray):
        return [normalize(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return float(FLOAT_FORMAT % value)
    return value


def write_json(path: PathLike, data: Any) -> Path:
    """Write data as sorted-key JSON"""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(normalize(data), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_csv(path: PathLike, rows: Iterable[dict], columns: Optional[List[str]] = None) -> Path:
    """Write dict rows as CSV; column order is first appearance unless given"""
    path = Path(path)
    rows = list(rows)
    if columns is None:
        columns = []
        for row in rows:
            columns += [key for key in row if key not in columns]
    frame = pd.DataFrame(rows, columns=columns)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as e:
        logger.error(f"Error writing {path}: {e}")
        raise
    logger.debug(f"Wrote {len(rows)} rows to {path}")
    return path


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return path


class NodeLogRecorder:
    """Collects branch-and-bound node events and writes them as one CSV"""

    COLUMNS = ["node", "depth", "bound", "incumbent", "branched", "outcome"]

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.events: List[dict] = []

    def __call__(self, event: dict) -> None:
        self.events.append({key: event.get(key) for key in self.COLUMNS})

    def flush(self) -> Path:
        return write_csv(self.path, self.events, self.COLUMNS)
