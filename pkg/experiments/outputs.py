"""Deterministic report writers: sorted-key JSON, CSV series, and a separate metadata file."""
from __future__ import annotations

import csv
import json
import logging
import os
from datetime import datetime, timezone
from typing import Any, Dict, List, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (complex, np.complexfloating)):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def canonical_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, default=_plain, allow_nan=False) + "\n"


def write_json(path: str, payload: Dict[str, Any]) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_json(payload))
    logger.debug("wrote %s", path)
    return path


def write_csv(path: str, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str] | None = None) -> str:
    """One row per dict; columns default to the sorted union of keys."""
    if fieldnames is None:
        fieldnames = sorted({key for row in rows for key in row})
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(fieldnames), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _cell(row.get(key)) for key in fieldnames})
    logger.debug("wrote %s (%d rows)", path, len(rows))
    return path


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, (list, tuple)):
        return " ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return value


def write_metadata(directory: str, stem: str, subcommand: str, artifacts: List[str],
                   extra: Dict[str, Any] | None = None) -> str:
    '''Timestamps and run environment live here so reports stay byte-identical'''
    payload = {
        "subcommand": subcommand,
        "finished_at": datetime.now(timezone.utc).isoformat(),
        "artifacts": [os.path.basename(a) for a in artifacts],
        **(extra or {}),
    }
    return write_json(os.path.join(directory, f"{stem}.metadata.json"), payload)
