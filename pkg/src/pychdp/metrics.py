"""Append-only JSON-lines metrics log."""

# -*- coding: utf-8 -*-
import json
import logging
import math
import threading
from pathlib import Path
from typing import IO, Any, Dict, List, Optional, Union

import pandas as pd

logger = logging.getLogger(__name__)

EVENTS = ("train", "eval")


def _clean(value: Any) -> Any:
    """Make a metric value JSON-safe (non-finite floats become null)."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


class MetricsLog:
    """Single-writer append-only log of training and evaluation events.

    Every record carries ``event`` and a non-decreasing ``step``. Records
    are written with sorted keys and no timestamps, so two identical runs
    produce identical files.
    """

    def __init__(self, path: Union[str, Path]):
        """Open (or create) the log at ``path`` for appending."""
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._file: Optional[IO[str]] = open(self.path, "a", encoding="utf-8")
        self.last_step = -1
        self.count = 0

    def write(self, event: str, step: int, **values: Any) -> None:
        """Append one record."""
        if event not in EVENTS:
            raise ValueError(f"Unknown metrics event {event!r}")
        with self._lock:
            if self._file is None:
                raise ValueError(f"Metrics log {self.path} is closed")
            if step < self.last_step:
                raise ValueError(
                    f"Metrics step went backwards: {step} after {self.last_step}"
                )
            record = _clean({"event": event, "step": int(step), **values})
            self._file.write(json.dumps(record, sort_keys=True) + "\n")
            self._file.flush()
            self.last_step = step
            self.count += 1

    def close(self) -> None:
        """Close the underlying file."""
        with self._lock:
            if self._file is not None:
                self._file.close()
                self._file = None

    def __enter__(self) -> "MetricsLog":
        """Context manager entry."""
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        """Context manager exit."""
        self.close()


def read_metrics(
    path: Union[str, Path], event: Optional[str] = None
) -> List[Dict[str, Any]]:
    """Read every record (optionally only one event kind)."""
    path = Path(path)
    if not path.exists():
        raise ValueError(f"Metrics file not found: {path}")
    records = []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(
                    f"Corrupt metrics line {line_no} in {path}: {err}"
                ) from err
            if event is None or record.get("event") == event:
                records.append(record)
    return records


def metrics_frame(path: Union[str, Path], event: Optional[str] = None) -> pd.DataFrame:
    """Metrics as a DataFrame with one row per record."""
    return pd.DataFrame.from_records(read_metrics(path, event))
