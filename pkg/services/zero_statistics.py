# services/zero_statistics.py
"""Empirical zero statistics of SU(2) polynomials in scaled coordinates.

Pipeline: sample_section -> find_roots -> rescale_roots -> pair_correlation_estimate.
Pair convention: unordered pairs counted once with weight 2. Edge correction is the
translation (set covariance) correction of the disc window.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from records.models import CorrelationCurve, MCEstimate
from services.root_finder import RootSet, polynomial_roots
from services.sun_ensemble import EnsembleParams, PolynomialSection, sample_section
from utils.errors import DomainError, InsufficientSamplesError
from utils.rng import check_seed, stream_generator

logger = logging.getLogger(__name__)

# ---------- Constants (single source of truth)
DEFAULT_RADIUS = 5.0
DEFAULT_DEGREE = 500
DEFAULT_BIN_WIDTH = 0.2
CHART_GUARD = 0.5
MIN_SAMPLES = 2
PAIR_WEIGHT = 2.0
PROJECTIONS = ("chart", "equal-area")

__all__ = [
    "RootSet", "ScaledWindow", "find_roots", "rescale_roots", "pair_correlation_estimate",
    "density_estimate", "disc_set_covariance", "poisson_point_sets", "sample_scaled_zeros",
    "default_edges", "expected_window_count",
]


@dataclass(frozen=True)
class ScaledWindow:
    """Disc |zeta| <= radius around the chart origin, in sqrt(N)-scaled coordinates.

    ``N=None`` describes a plain planar window (synthetic point sets), with no chart guard.
    """
    radius: float = DEFAULT_RADIUS
    N: Optional[int] = DEFAULT_DEGREE

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise DomainError(f"window radius must be positive, got {self.radius}")
        if self.N is not None and self.radius > CHART_GUARD * math.sqrt(self.N):
            raise DomainError(
                f"window radius {self.radius} exceeds the chart guard {CHART_GUARD}*sqrt(N) for N={self.N}"
            )

    @property
    def area(self) -> float:
        return math.pi * self.radius ** 2


def default_edges(r_min: float = 0.1, r_max: float = 3.0, width: float = DEFAULT_BIN_WIDTH) -> np.ndarray:
    count = int(round((r_max - r_min) / width))
    return r_min + width * np.arange(count + 1)


# ---------- Roots

def find_roots(p: PolynomialSection) -> RootSet:
    """All N roots of a one-variable section (Aberth-Ehrlich plus Newton polish)."""
    if p.m != 1:
        raise DomainError(f"find_roots handles one-variable sections only, got m={p.m}")
    return polynomial_roots(p.coefficients, p.log_scale)


def rescale_roots(rs: RootSet, N: int, w: ScaledWindow, projection: str = "chart") -> np.ndarray:
    """Roots in scaled coordinates, clipped to the window.

    ``chart`` maps z -> sqrt(N) z. ``equal-area`` maps z -> sqrt(N) z / sqrt(1 + |z|^2),
    the azimuthal equal-area picture of the sphere in which the expected zero density is
    exactly 1/pi at every N.
    """
    if rs.degree != N or (w.N is not None and w.N != N):
        raise DomainError(f"inconsistent degree: roots of degree {rs.degree}, N={N}, window N={w.N}")
    roots = np.asarray(rs.roots, dtype=complex)
    if projection == "chart":
        scaled = math.sqrt(N) * roots
    elif projection == "equal-area":
        scaled = math.sqrt(N) * roots / np.sqrt(1.0 + np.abs(roots) ** 2)
    else:
        raise DomainError(f"unknown projection {projection!r}; expected one of {PROJECTIONS}")
    return scaled[np.abs(scaled) <= w.radius]


def expected_window_count(N: int, w: ScaledWindow, projection: str = "chart") -> float:
    """Expected number of retained scaled zeros at degree N."""
    r2 = w.radius ** 2
    if projection == "equal-area":
        return r2
    return r2 / (1.0 + r2 / N)


def _sample_one(params: EnsembleParams, stream: int, w: ScaledWindow, projection: str) -> np.ndarray:
    section = sample_section(params, stream)
    return rescale_roots(find_roots(section), params.N, w, projection)


def sample_scaled_zeros(params: EnsembleParams, streams: Sequence[int], w: ScaledWindow,
                        projection: str = "chart", workers: int = 1) -> List[np.ndarray]:
    """Scaled zero sets for the given stream indices, returned in stream order."""
    if params.m != 1:
        raise DomainError("empirical zero statistics are implemented for m = 1 only")
    streams = list(streams)

    def run(stream: int) -> np.ndarray:
        return _sample_one(params, stream, w, projection)

    if workers > 1 and len(streams) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(run, streams))
    else:
        out = [run(s) for s in streams]
    logger.info("sampled %d zero sets (N=%d, R=%.2f, %s)", len(out), params.N, w.radius, projection)
    return out


def poisson_point_sets(intensity: float, w: ScaledWindow, samples: int, seed: int) -> List[np.ndarray]:
    """Homogeneous Poisson patterns in the disc window (complete spatial randomness)."""
    if not intensity > 0:
        raise DomainError("intensity must be positive")
    check_seed(seed)
    out = []
    for s in range(samples):
        rng = stream_generator(seed, s)
        n = rng.poisson(intensity * w.area)
        radius = w.radius * np.sqrt(rng.random(n))
        angle = 2.0 * math.pi * rng.random(n)
        out.append(radius * np.exp(1j * angle))
    return out


# ---------- Estimators

def disc_set_covariance(R: float, r):
    """Area of the disc of radius R intersected with its translate by a vector of length r."""
    r_arr = np.clip(np.asarray(r, dtype=float), 0.0, 2.0 * R)
    half = r_arr / (2.0 * R)
    res = 2.0 * R * R * np.arccos(half) - 0.5 * r_arr * np.sqrt(np.maximum(4.0 * R * R - r_arr * r_arr, 0.0))
    return float(res) if np.ndim(res) == 0 else res


def _pair_sums(points: np.ndarray, edges: np.ndarray, w: ScaledWindow) -> np.ndarray:
    pts = np.asarray(points, dtype=complex)
    if pts.size < 2:
        return np.zeros(edges.size - 1)
    i, j = np.triu_indices(pts.size, k=1)
    dist = np.abs(pts[i] - pts[j])
    keep = (dist >= edges[0]) & (dist < edges[-1])
    dist = dist[keep]
    weights = PAIR_WEIGHT * w.area / disc_set_covariance(w.radius, dist)
    sums, _ = np.histogram(dist, bins=edges, weights=weights)
    return sums


def pair_correlation_estimate(point_sets: Sequence[np.ndarray], w: ScaledWindow, edges,
                              intensity: Optional[float] = None,
                              min_samples: int = MIN_SAMPLES) -> CorrelationCurve:
    """Edge-corrected pair correlation g(r) per bin, with across-sample standard errors.

    ``intensity`` defaults to the pooled estimate (total points / (samples * window area)).
    Self pairs never enter, so the diagonal atom is excluded by construction.
    """
    edges = np.asarray(edges, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("bin edges must be an ascending sequence of at least two values")
    if edges[0] < 0:
        raise DomainError("bin edges must be nonnegative")
    if edges[-1] > w.radius:
        raise DomainError(f"r_max={edges[-1]} exceeds the window radius {w.radius}")
    n_samples = len(point_sets)
    if n_samples < min_samples:
        raise InsufficientSamplesError(f"pair correlation needs >= {min_samples} point sets, got {n_samples}")

    if intensity is None:
        total = sum(np.asarray(p).size for p in point_sets)
        intensity = total / (n_samples * w.area)
    if not intensity > 0:
        raise InsufficientSamplesError("no points in any sample; intensity cannot be estimated")

    per_sample = np.vstack([_pair_sums(p, edges, w) for p in point_sets])
    annulus = math.pi * (edges[1:] ** 2 - edges[:-1] ** 2)
    per_sample /= intensity ** 2 * annulus * w.area
    values = per_sample.mean(axis=0)
    stderr = per_sample.std(axis=0, ddof=1) / math.sqrt(n_samples)

    empty = ~np.any(per_sample > 0, axis=0)
    if empty.any():
        logger.warning("%d of %d bins received no pairs", int(empty.sum()), empty.size)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return CorrelationCurve(centers, values, stderr, empty_bins=empty)


def density_estimate(point_sets: Sequence[np.ndarray], w: ScaledWindow) -> MCEstimate:
    """Mean number of points per unit window area, with its standard error."""
    if len(point_sets) == 0:
        return MCEstimate(value=0.0, stderr=0.0, samples=0)
    counts = np.array([np.asarray(p).size for p in point_sets], dtype=float) / w.area
    stderr = counts.std(ddof=1) / math.sqrt(counts.size) if counts.size > 1 else 0.0
    return MCEstimate(value=float(counts.mean()), stderr=float(stderr), samples=int(counts.size))
