# records/models.py
"""Plain data records passed between the services and the CLI."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

# results never depend on these, so they stay out of the output bytes
EXECUTION_ONLY_FIELDS = ("workers", "out")


@dataclass
class CorrelationCurve:
    """Radial curve of (r, value, stderr) triples; stderr is zero for closed forms."""
    grid: np.ndarray
    values: np.ndarray
    stderr: np.ndarray = None
    empty_bins: Optional[np.ndarray] = None     # empirical curves only

    def __post_init__(self) -> None:
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.stderr is None:
            self.stderr = np.zeros_like(self.values)
        self.stderr = np.asarray(self.stderr, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape or self.values.shape != self.stderr.shape:
            raise ValueError("grid, values and stderr must be 1-D arrays of equal length")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("curve grid must be strictly ascending")
        if np.any(self.stderr < 0):
            raise ValueError("stderr entries must be nonnegative")

    def __len__(self) -> int:
        return self.grid.size

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"r": self.grid, "value": self.values, "stderr": self.stderr})


@dataclass
class MCEstimate:
    value: float
    stderr: float
    samples: int
    seed: Optional[int] = None


@dataclass
class DerivativeEstimate:
    value: float
    step: float
    error: float


@dataclass(frozen=True)
class DiagonalAtom:
    """Point mass of the two-point measure on the diagonal (self pairs)."""
    mass: float
    description: str = "diagonal atom of mass pi per unit density^2 (self pairs)"


@dataclass
class RunConfig:
    command: str
    m: int = 1
    degree: int = 500
    degrees: List[int] = field(default_factory=lambda: [25, 100, 400, 1600])
    samples: int = 10_000
    seed: int = 42
    radius: float = 5.0
    bins: List[float] = field(default_factory=list)
    grid: List[float] = field(default_factory=list)
    grid_step: float = 0.25
    projection: str = "equal-area"
    gram: Optional[List[List[Any]]] = None
    vectors: Optional[List[List[Any]]] = None
    out: Optional[str] = None
    workers: int = 1
    quick: bool = False

    def to_dict(self) -> Dict[str, Any]:
        """Config echo for output files; execution-only fields (workers, out) are left out."""
        data = asdict(self)
        for key in EXECUTION_ONLY_FIELDS:
            data.pop(key)
        return data


@dataclass
class ResultRecord:
    """One command's output: config echo, version, a table and a summary."""
    command: str
    version: str
    config: Dict[str, Any]
    table: pd.DataFrame
    summary: Dict[str, Any] = field(default_factory=dict)
