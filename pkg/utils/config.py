# utils/config.py
"""Run configuration: environment bootstrap, JSON config files and validation.

Precedence: built-in defaults < JSON config file < command-line flags.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

from records.models import RunConfig
from utils.errors import ConfigValidationError

load_dotenv()

# ---------- Constants (single source of truth)
WORKERS_ENV = "ZEROCORR_WORKERS"
LOG_LEVEL_ENV = "ZEROCORR_LOG_LEVEL"
COMMANDS = ("theory-curve", "empirical-pc", "szego-check", "gn", "self-test")
PROJECTIONS = ("chart", "equal-area")
DEFAULT_BINS = "0.1:3.0:0.2"
DEFAULT_THEORY_GRID = "0.1:5.0:0.1"
CHART_GUARD = 0.5


def default_workers() -> int:
    raw = os.getenv(WORKERS_ENV)
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError:
        raise ConfigValidationError(WORKERS_ENV, f"must be an integer, got {raw!r}")
    if value < 1:
        raise ConfigValidationError(WORKERS_ENV, f"must be >= 1, got {value}")
    return value


def default_log_level() -> str:
    return os.getenv(LOG_LEVEL_ENV, "INFO").upper()


def parse_grid(raw: Any, name: str) -> List[float]:
    """'start:stop:step' (inclusive stop), 'a,b,c', or an already parsed list."""
    if raw is None:
        return []
    if isinstance(raw, (list, tuple)):
        try:
            return [float(v) for v in raw]
        except (TypeError, ValueError):
            raise ConfigValidationError(name, f"entries must be numbers, got {raw!r}")
    text = str(raw).strip()
    if not text:
        return []
    try:
        if ":" in text:
            start, stop, step = (float(p) for p in text.split(":"))
            if step <= 0:
                raise ConfigValidationError(name, "step must be positive")
            count = int(math.floor((stop - start) / step + 1e-9))
            return [float(v) for v in start + step * np.arange(count + 1)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigValidationError(name, f"expected 'start:stop:step' or a comma list, got {text!r}")


def parse_int_list(raw: Any, name: str) -> List[int]:
    if isinstance(raw, (list, tuple)):
        values = list(raw)
    elif isinstance(raw, int):
        values = [raw]
    else:
        values = [p for p in str(raw).split(",") if p.strip()]
    try:
        return [int(v) for v in values]
    except (TypeError, ValueError):
        raise ConfigValidationError(name, f"expected integers, got {raw!r}")


def parse_complex_matrix(raw: Any, name: str) -> Optional[np.ndarray]:
    """Rows of numbers, '[re, im]' pairs or strings such as '0.5+0.5j'."""
    if raw is None:
        return None
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as e:
            raise ConfigValidationError(name, f"not valid JSON: {e}")

    def entry(v: Any) -> complex:
        if isinstance(v, (list, tuple)) and len(v) == 2:
            return complex(float(v[0]), float(v[1]))
        if isinstance(v, str):
            return complex(v.replace(" ", ""))
        return complex(v)

    try:
        rows = [[entry(v) for v in row] for row in raw]
        arr = np.asarray(rows, dtype=complex)
    except (TypeError, ValueError):
        raise ConfigValidationError(name, "entries must be numbers, [re, im] pairs or complex strings")
    if arr.ndim != 2:
        raise ConfigValidationError(name, "must be a rectangular matrix")
    return arr


def load_config_file(path: Optional[str]) -> Dict[str, Any]:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigValidationError("config", f"file not found: {path}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigValidationError("config", f"{path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise ConfigValidationError("config", "top level of the config file must be an object")
    return data


def build_run_config(command: str, file_values: Dict[str, Any], cli_values: Dict[str, Any]) -> RunConfig:
    """Merge the layers; ``None`` in ``cli_values`` means 'flag not given'."""
    if command not in COMMANDS:
        raise ConfigValidationError("command", f"unknown command {command!r}")
    known = {f.name for f in fields(RunConfig)}
    merged: Dict[str, Any] = {}
    for key, value in file_values.items():
        if key not in known or key == "command":
            raise ConfigValidationError(key, "unknown key in config file")
        merged[key] = value
    for key, value in cli_values.items():
        if value is not None:
            merged[key] = value
    merged.setdefault("workers", default_workers())
    if command == "empirical-pc":
        merged.setdefault("bins", DEFAULT_BINS)
    if command == "theory-curve":
        merged.setdefault("grid", DEFAULT_THEORY_GRID)
    if command == "szego-check":
        merged.setdefault("radius", 2.0)
    if command == "gn":
        merged.setdefault("samples", 1_000_000)

    if "degree" in merged:
        degrees = parse_int_list(merged["degree"], "degree")
        if command == "szego-check":
            merged["degrees"] = degrees
            merged.pop("degree")
        else:
            if len(degrees) != 1:
                raise ConfigValidationError("degree", "expects a single degree for this command")
            merged["degree"] = degrees[0]
    if "degrees" in merged:
        merged["degrees"] = parse_int_list(merged["degrees"], "degrees")
    merged["bins"] = parse_grid(merged.get("bins"), "bins")
    merged["grid"] = parse_grid(merged.get("grid"), "grid")
    try:
        cfg = RunConfig(command=command, **merged)
    except TypeError as e:
        raise ConfigValidationError("config", str(e))
    return validate(cfg)


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigValidationError(field, message)


def validate(cfg: RunConfig) -> RunConfig:
    """Check every numeric parameter against the preconditions of the command."""
    _require(isinstance(cfg.workers, int) and cfg.workers >= 1, "workers", "must be an integer >= 1")
    _require(isinstance(cfg.seed, int) and 0 <= cfg.seed < 2 ** 64, "seed", "must be a 64-bit unsigned integer")
    _require(isinstance(cfg.m, int) and cfg.m >= 1, "m", "must be an integer >= 1")
    _require(cfg.projection in PROJECTIONS, "projection", f"must be one of {PROJECTIONS}")

    if cfg.command == "theory-curve":
        grid = np.asarray(cfg.grid, dtype=float)
        _require(bool(np.all(grid > 0)), "grid", "radii must be > 0 (the diagonal is reported as metadata)")
        _require(bool(np.all(np.diff(grid) > 0)), "grid", "must be strictly ascending")

    elif cfg.command == "empirical-pc":
        _require(cfg.m == 1, "m", "empirical pair correlation is implemented for m = 1 only")
        _require(isinstance(cfg.degree, int) and cfg.degree >= 1, "degree", "must be an integer >= 1")
        _require(isinstance(cfg.samples, int) and cfg.samples >= 2, "samples", "must be an integer >= 2")
        _require(cfg.radius > 0, "radius", "must be positive")
        _require(cfg.radius <= CHART_GUARD * math.sqrt(cfg.degree), "radius",
                 f"must not exceed {CHART_GUARD}*sqrt(degree) = {CHART_GUARD * math.sqrt(cfg.degree):.4g}")
        bins = np.asarray(cfg.bins, dtype=float)
        _require(bins.size >= 2, "bins", "needs at least two edges")
        _require(bool(np.all(np.diff(bins) > 0)) and bins[0] >= 0, "bins", "edges must be ascending and >= 0")
        _require(bins[-1] <= cfg.radius, "bins", f"last edge {bins[-1]} exceeds the window radius {cfg.radius}")

    elif cfg.command == "szego-check":
        _require(len(cfg.degrees) >= 1, "degree", "needs at least one degree")
        _require(all(n >= 4 for n in cfg.degrees), "degree", "every degree must be >= 4")
        _require(cfg.radius > 0, "radius", "must be positive")
        guard = CHART_GUARD * math.sqrt(min(cfg.degrees))
        _require(cfg.radius <= guard, "radius", f"must not exceed {CHART_GUARD}*sqrt(min degree) = {guard:.4g}")
        _require(cfg.grid_step > 0, "grid_step", "must be positive")

    elif cfg.command == "gn":
        _require((cfg.gram is None) != (cfg.vectors is None), "gram",
                 "give exactly one of a Gram matrix or a vector list")
        _require(isinstance(cfg.samples, int) and cfg.samples >= 1, "samples", "must be an integer >= 1")
        if cfg.gram is not None:
            g = parse_complex_matrix(cfg.gram, "gram")
            _require(g.shape[0] == g.shape[1], "gram", "must be square")
            _require(bool(np.allclose(g, g.conj().T, atol=1e-12)), "gram", "must be Hermitian")
            _require(bool(np.allclose(np.diag(g), 1.0, atol=1e-12)), "gram", "must have unit diagonal")
        else:
            x = parse_complex_matrix(cfg.vectors, "vectors")
            _require(x.shape[1] >= x.shape[0], "vectors", "ambient dimension must be >= number of vectors")
            _require(bool(np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-10)), "vectors",
                     "every vector must have unit norm")
    return cfg
