# services/sun_ensemble.py
"""SU(m+1) polynomials: Gaussian random sections of O(N) over CP^m in the affine chart.

A section is s(z) = sum_alpha c_alpha w_alpha z^alpha over multi-indices |alpha| <= N
with i.i.d. standard complex Gaussian c_alpha and weights w_alpha = sqrt of the
multinomial coefficient N! / (alpha! (N - |alpha|)!). Any global constant in the
weights moves neither the zeros nor the normalized kernel.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from services.universal_formulas import limit_kernel_modulus
from utils.errors import DomainError
from utils.rng import check_seed, standard_complex_normal, stream_generator

logger = logging.getLogger(__name__)

# ---------- Constants (single source of truth)
COUNT_MAX = np.iinfo(np.int64).max
LOG_WEIGHT_CEILING = 600.0     # exp(600) is still finite in double precision
CHART_GUARD = 0.5              # grid_radius <= CHART_GUARD * sqrt(N)


@dataclass(frozen=True)
class EnsembleParams:
    m: int
    N: int
    seed: int

    def __post_init__(self) -> None:
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"dimension m must be >= 1, got {self.m}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"degree N must be >= 1, got {self.N}")
        check_seed(self.seed)
        basis_dimension(self.m, self.N)


@dataclass
class PolynomialSection:
    """Coefficients of a section in the monomial basis of the affine chart.

    ``exponents[k]`` is the multi-index of ``coefficients[k]``; for m = 1 the
    coefficients are ordered by ascending power of z. When ``log_scale`` is set the
    k-th coefficient is ``coefficients[k] * exp(log_scale[k])``; sampling keeps the
    weights in that form once they leave double range.
    """
    coefficients: np.ndarray
    exponents: np.ndarray
    N: int
    m: int
    log_scale: Optional[np.ndarray] = None

    def scaled(self, factor: complex) -> "PolynomialSection":
        return PolynomialSection(self.coefficients * factor, self.exponents, self.N, self.m, self.log_scale)


def basis_dimension(m: int, N: int) -> int:
    """d_N = binomial(N + m, m)."""
    if m < 1 or N < 1:
        raise DomainError(f"basis_dimension requires m, N >= 1, got m={m}, N={N}")
    d = math.comb(N + m, m)
    if d > COUNT_MAX:
        raise OverflowError(f"basis dimension binomial({N + m}, {m}) exceeds the 64-bit count type")
    return d


def monomial_exponents(m: int, N: int) -> np.ndarray:
    """All multi-indices alpha in N^m with |alpha| <= N, graded then lexicographic."""
    if m == 1:
        return np.arange(N + 1, dtype=np.int64).reshape(-1, 1)
    rows = []
    for total in range(N + 1):
        for combo in itertools.combinations_with_replacement(range(m), total):
            alpha = [0] * m
            for idx in combo:
                alpha[idx] += 1
            rows.append(alpha)
    return np.asarray(rows, dtype=np.int64).reshape(-1, m)


def basis_log_weights(exponents: np.ndarray, N: int) -> np.ndarray:
    """log w_alpha = 1/2 log(N! / (alpha! (N - |alpha|)!))."""
    total = exponents.sum(axis=1)
    log_multinomial = (special.gammaln(N + 1)
                       - special.gammaln(exponents + 1).sum(axis=1)
                       - special.gammaln(N - total + 1))
    return 0.5 * log_multinomial


def sample_section(p: EnsembleParams, stream: int) -> PolynomialSection:
    """Draw the section for stream index ``stream``; deterministic in (seed, stream)."""
    exponents = monomial_exponents(p.m, p.N)
    log_w = basis_log_weights(exponents, p.N)
    log_form = bool(log_w.max() > LOG_WEIGHT_CEILING)
    if log_form:
        logger.debug("keeping basis weights in log form for N=%d (max log weight %.1f)", p.N, log_w.max())
    rng = stream_generator(p.seed, stream)
    while True:
        draws = standard_complex_normal(rng, log_w.size)
        if np.any(draws != 0):
            break
        logger.warning("identically zero section drawn for stream %d; redrawing", stream)
    if log_form:
        return PolynomialSection(draws, exponents, p.N, p.m, log_scale=log_w)
    return PolynomialSection(draws * np.exp(log_w), exponents, p.N, p.m)


# ---------- Normalized kernel

def _as_points(z, m: int) -> np.ndarray:
    arr = np.asarray(z, dtype=complex)
    if m == 1 and (arr.ndim == 0 or arr.shape[-1] != 1):
        arr = arr[..., None]
    if arr.shape[-1] != m:
        raise DomainError(f"points must have {m} complex coordinates, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError("points must have finite coordinates")
    return arr


def fs_cos_theta(m: int, N: int, z, w):
    """|Pi_N(z,w)| / sqrt(Pi_N(z,z) Pi_N(w,w)) for the Fubini-Study kernel, in log space.

    Equal to (|1 + z.conj(w)|^2 / ((1 + |z|^2)(1 + |w|^2)))^(N/2).
    """
    z_arr = _as_points(z, m)
    w_arr = _as_points(w, m)
    inner = 1.0 + np.sum(z_arr * w_arr.conj(), axis=-1)
    nz = np.sum(np.abs(z_arr) ** 2, axis=-1)
    nw = np.sum(np.abs(w_arr) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        log_cos = 0.5 * N * (2.0 * np.log(np.abs(inner)) - np.log1p(nz) - np.log1p(nw))
    res = np.minimum(np.exp(log_cos), 1.0)
    return float(res) if np.ndim(res) == 0 else res


def explicit_kernel(N: int, z: complex, w: complex) -> complex:
    """Pi_N(z, w) as the orthonormal-basis sum sum_j binom(N, j) z^j conj(w)^j (m = 1)."""
    j = np.arange(N + 1)
    weights = special.comb(N, j)
    return complex(np.sum(weights * np.power(complex(z), j) * np.power(complex(w).conjugate(), j)))


def fs_zero_density(N: int, z) -> np.ndarray:
    """Expected zero density N / (pi (1 + |z|^2)^2) of the m = 1 ensemble at degree N."""
    z_arr = np.asarray(z, dtype=complex)
    res = N / (math.pi * (1.0 + np.abs(z_arr) ** 2) ** 2)
    return float(res) if np.ndim(res) == 0 else res


# ---------- Scaling check

def _lattice_ball(m: int, radius: float, step: float) -> np.ndarray:
    ticks = np.arange(-radius, radius + 0.5 * step, step)
    mesh = np.meshgrid(*([ticks] * (2 * m)), indexing="ij")
    flat = np.stack([g.ravel() for g in mesh], axis=-1)
    pts = flat[:, 0::2] + 1j * flat[:, 1::2]
    keep = np.sum(np.abs(pts) ** 2, axis=-1) <= radius * radius + 1e-12
    return pts[keep]


def szego_scaling_error(m: int, N: int, grid_radius: float, grid_step: float,
                        chunk: Optional[int] = 4096) -> float:
    """sup |fs_cos_theta(z/sqrt N, w/sqrt N) - exp(-|z-w|^2/2)| over grid pairs in the ball.

    Both sides are invariant under a joint unitary map of (z, w), so z runs over the
    radial grid on the first real axis and w over the full lattice of the ball.
    """
    if N < 4:
        raise DomainError(f"szego_scaling_error requires N >= 4, got {N}")
    if grid_step <= 0 or grid_radius <= 0:
        raise DomainError("grid_radius and grid_step must be positive")
    if grid_radius > CHART_GUARD * math.sqrt(N):
        raise DomainError(f"grid_radius {grid_radius} exceeds the chart guard {CHART_GUARD}*sqrt({N})")

    w_pts = _lattice_ball(m, grid_radius, grid_step)
    radial = np.arange(0.0, grid_radius + 0.5 * grid_step, grid_step)
    radial = radial[radial <= grid_radius + 1e-12]
    z_pts = np.zeros((radial.size, m), dtype=complex)
    z_pts[:, 0] = radial

    scale = 1.0 / math.sqrt(N)
    worst = 0.0
    for start in range(0, w_pts.shape[0], chunk):
        w_blk = w_pts[start:start + chunk]
        zz = z_pts[:, None, :]
        ww = w_blk[None, :, :]
        finite_n = fs_cos_theta(m, N, zz * scale, ww * scale)
        limit = limit_kernel_modulus(zz, ww)
        worst = max(worst, float(np.max(np.abs(finite_n - limit))))
    logger.debug("szego error m=%d N=%d: %.3e", m, N, worst)
    return worst
