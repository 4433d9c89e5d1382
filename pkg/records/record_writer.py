# records/record_writer.py
"""Serialization of ResultRecords: CSV tables with '#' metadata lines, or JSON."""
from __future__ import annotations

import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Optional

import numpy as np

from records.models import ResultRecord

logger = logging.getLogger(__name__)

# ---------- Constants (single source of truth)
ARTIFACT_VERSION = "v0.1.0"
SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"


def _plain(value: Any) -> Any:
    # Why: json cannot encode numpy scalars, complex numbers or NaN
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) or math.isinf(v) else float(FLOAT_FORMAT % v)
    if isinstance(value, (complex, np.complexfloating)):
        return [_plain(value.real), _plain(value.imag)]
    return value


def _dumps(value: Any, indent: Optional[int] = None) -> str:
    return json.dumps(_plain(value), sort_keys=True, indent=indent, ensure_ascii=False)


def render_csv(record: ResultRecord) -> str:
    lines = [
        f"# schema: {SCHEMA_VERSION}",
        f"# version: {record.version}",
        f"# command: {record.command}",
        f"# config: {_dumps(record.config)}",
    ]
    for key in sorted(record.summary):
        lines.append(f"# {key}: {_dumps(record.summary[key])}")
    table = record.table.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return "\n".join(lines) + "\n" + table


def render_json(record: ResultRecord) -> str:
    payload = {
        "schema": SCHEMA_VERSION,
        "version": record.version,
        "command": record.command,
        "config": record.config,
        "summary": record.summary,
        "columns": list(record.table.columns),
        "rows": record.table.to_numpy().tolist(),
    }
    return _dumps(payload, indent=2) + "\n"


def write_record(record: ResultRecord, out: Optional[str]) -> str:
    """Render and write to ``out`` (stdout when None or '-'); JSON if the path ends in .json."""
    as_json = bool(out) and out.lower().endswith(".json")
    text = render_json(record) if as_json else render_csv(record)
    if not out or out == "-":
        sys.stdout.write(text)
    else:
        path = Path(out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
        logger.info("wrote %s (%d rows)", path, len(record.table))
    return text
