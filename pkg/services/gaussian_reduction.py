# services/gaussian_reduction.py
"""Gaussian log-integrals behind the correlation formulas.

G_n^d(x^1..x^n) = E prod_j log|<c, x^j>| for a standard complex Gaussian c in C^d
depends only on the Gram matrix of the unit vectors x^j. ``gram_to_xi`` builds the
lower-triangular frame coefficients, ``Gn_monte_carlo`` integrates in the reduced
dimension n and ``G_full_mc`` in the ambient one. For n = 2 the integral
G(cos theta) is evaluated by quadrature after Jensen's formula removes the angle.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np
from scipy import integrate, special

from records.models import CorrelationCurve, DerivativeEstimate, MCEstimate
from services.universal_formulas import laplacian_G_closed
from utils.errors import (
    CoincidentConfigurationError,
    ConvergenceError,
    DomainError,
    GridTooCoarseError,
)
from utils.rng import check_seed, sample_blocks, standard_complex_normal, stream_generator

logger = logging.getLogger(__name__)

# ---------- Constants (single source of truth)
RANK_TOLERANCE = 1e-12
UNIT_NORM_TOLERANCE = 1e-10
QUAD_EPSABS = 1e-12
QUAD_TARGET = 1e-9
QUAD_LIMIT = 200
DERIVATIVE_RTOL = 1e-6
EULER_GAMMA = float(np.euler_gamma)

# Moments M_k = int_0^inf rho^3 e^(-rho^2) (log rho)^k d rho, from Gamma(2) and its derivatives
_M0 = 0.5
_M1 = 0.25 * float(special.digamma(2.0))
_M2 = 0.125 * (float(special.digamma(2.0)) ** 2 + float(special.polygamma(1, 2.0)))


# ============================================================
# Gram matrix -> xi frame
# ============================================================

def gram_matrix(vectors: Sequence[Sequence[complex]]) -> np.ndarray:
    """g_jk = <x^j, x^k> (linear in the first slot)."""
    x = np.asarray(vectors, dtype=complex)
    return x @ x.conj().T


def _check_gram(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DomainError(f"Gram matrix must be square, got shape {g.shape}")
    if not np.allclose(g, g.conj().T, atol=1e-12):
        raise DomainError("Gram matrix must be Hermitian")
    if not np.allclose(np.diag(g), 1.0, atol=1e-12):
        raise DomainError("Gram matrix must have unit diagonal (unit vectors)")
    if np.any(np.abs(g) > 1.0 + 1e-12):
        raise DomainError("Gram matrix entries must have modulus <= 1")
    return g


def gram_to_xi(g) -> np.ndarray:
    """Lower-triangular xi with xi xi* = g and positive real diagonal.

    Built row by row (lexicographically): for k < j,
    xi_jk = (g_jk - sum_{l<k} xi_jl conj(xi_kl)) / xi_kk, and
    xi_jj = sqrt(1 - sum_{l<j} |xi_jl|^2), so each row is a unit vector.
    """
    g = _check_gram(g)
    n = g.shape[0]
    xi = np.zeros((n, n), dtype=complex)
    for j in range(n):
        for k in range(j):
            acc = g[j, k] - np.dot(xi[j, :k], xi[k, :k].conj())
            xi[j, k] = acc / xi[k, k].real
        pivot = 1.0 - float(np.sum(np.abs(xi[j, :j]) ** 2))
        if pivot < RANK_TOLERANCE:
            raise CoincidentConfigurationError(index=j, pivot=pivot, tolerance=RANK_TOLERANCE)
        xi[j, j] = math.sqrt(pivot)
    return xi


# ============================================================
# Monte Carlo integrals
# ============================================================

def _block_moments(rows: np.ndarray, seed: int, block: int, length: int) -> Tuple[int, float, float]:
    rng = stream_generator(seed, block)
    c = standard_complex_normal(rng, (length, rows.shape[1]))
    forms = c @ rows.T
    # exact zeros have probability zero; redraw the affected samples from the same stream
    bad = np.any(forms == 0, axis=1)
    while np.any(bad):
        logger.debug("redrawing %d samples with a vanishing linear form", int(bad.sum()))
        c[bad] = standard_complex_normal(rng, (int(bad.sum()), rows.shape[1]))
        forms[bad] = c[bad] @ rows.T
        bad = np.any(forms == 0, axis=1)
    vals = np.prod(np.log(np.abs(forms)), axis=1)
    mean = float(vals.mean())
    m2 = float(np.sum((vals - mean) ** 2))
    return length, mean, m2


def _merge(a: Tuple[int, float, float], b: Tuple[int, float, float]) -> Tuple[int, float, float]:
    # pairwise (Chan et al.) merge of count / mean / sum of squared deviations
    n_a, mean_a, m2_a = a
    n_b, mean_b, m2_b = b
    n = n_a + n_b
    delta = mean_b - mean_a
    return n, mean_a + delta * n_b / n, m2_a + m2_b + delta * delta * n_a * n_b / n


def _mc_log_product(rows: np.ndarray, samples: int, seed: int, workers: int) -> MCEstimate:
    """E prod_j log|sum_k c_k rows[j, k]| over standard complex Gaussian c."""
    if int(samples) < 1:
        raise DomainError(f"samples must be >= 1, got {samples}")
    seed = check_seed(seed)
    blocks = list(sample_blocks(int(samples)))

    def run(block):
        return _block_moments(rows, seed, *block)

    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]

    # merge in block order: the result does not depend on the worker count
    acc = parts[0]
    for part in parts[1:]:
        acc = _merge(acc, part)
    n, mean, m2 = acc
    std = math.sqrt(m2 / (n - 1)) if n > 1 else 0.0
    return MCEstimate(value=mean, stderr=std / math.sqrt(n), samples=n, seed=seed)


def Gn_monte_carlo(xi, samples: int, seed: int, workers: int = 1) -> MCEstimate:
    """Reduced n-dimensional integral (1/pi^n) int e^(-|c|^2) prod_j log|c . xi_j| dc."""
    xi = np.asarray(xi, dtype=complex)
    if xi.ndim != 2 or xi.shape[0] != xi.shape[1]:
        raise DomainError(f"xi must be a square matrix, got shape {xi.shape}")
    if np.any(np.triu(xi, 1) != 0):
        raise DomainError("xi must be lower triangular")
    if not np.allclose(np.linalg.norm(xi, axis=1), 1.0, atol=UNIT_NORM_TOLERANCE):
        raise DomainError("every row of xi must have unit norm")
    return _mc_log_product(xi, samples, seed, workers)


def G_full_mc(vectors, samples: int, seed: int, workers: int = 1) -> MCEstimate:
    """Ambient-dimension integral G_n^d(x^1..x^n) with c Gaussian in C^d."""
    x = np.asarray(vectors, dtype=complex)
    if x.ndim != 2:
        raise DomainError("vectors must be given as an n x d array")
    n, d = x.shape
    if d < n:
        raise DomainError(f"ambient dimension d={d} is smaller than the number of vectors n={n}")
    if not np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=UNIT_NORM_TOLERANCE):
        raise DomainError("all vectors must have unit norm")
    # <c, x^j> = sum_k c_k conj(x^j_k)
    return _mc_log_product(x.conj(), samples, seed, workers)


# ============================================================
# n = 2: Jensen-reduced quadrature
# ============================================================

def _check_cos(c: float) -> float:
    c = float(c)
    if not 0.0 <= c <= 1.0:
        raise DomainError(f"cos(theta) must lie in [0, 1], got {c}")
    return c


def _quad(fn: Callable[[float], float], a: float, b: float, points=None) -> float:
    if b <= a:
        return 0.0
    value, err = integrate.quad(fn, a, b, epsabs=QUAD_EPSABS, epsrel=1e-12, limit=QUAD_LIMIT, points=points)
    if err > QUAD_TARGET:
        raise ConvergenceError(f"quadrature on [{a}, {b}] did not reach {QUAD_TARGET:.0e}", error_estimate=err)
    return value


def _G2_polar(c: float) -> float:
    # G = 4 int_0^{pi/2} cos(phi) sin(phi) [M2 + (a+b) M1 + a b M0] d phi, where the rho
    # integral has been done in closed form, a = log cos(phi) and b is the log of the
    # larger of cos(phi) cos(theta) and sin(phi) sin(theta)
    s = math.sqrt(max(0.0, 1.0 - c * c))
    phi_switch = math.atan2(c, s)          # pi/2 - theta

    def piece(log_second: Callable[[float], float]) -> Callable[[float], float]:
        def integrand(phi: float) -> float:
            cp, sp = math.cos(phi), math.sin(phi)
            if cp <= 0.0 or sp <= 0.0:
                return 0.0
            a = math.log(cp)
            b = log_second(phi)
            return cp * sp * (_M2 + (a + b) * _M1 + a * b * _M0)
        return integrand

    total = 0.0
    if c > 0.0:
        log_c = math.log(c)
        total += _quad(piece(lambda phi: math.log(math.cos(phi)) + log_c), 0.0, phi_switch)
    if s > 0.0:
        log_s = math.log(s)
        total += _quad(piece(lambda phi: math.log(math.sin(phi)) + log_s), phi_switch, 0.5 * math.pi)
    return 4.0 * total


def _G2_cartesian(c: float) -> float:
    # 4 int int r1 r2 e^(-(r1^2+r2^2)) log r1 log max(r1 c, r2 s) dr1 dr2,
    # split along r2 = r1 c / s where the max switches
    s = math.sqrt(max(0.0, 1.0 - c * c))
    inf = np.inf

    def base(r2: float, r1: float) -> float:
        return r1 * r2 * math.exp(-(r1 * r1 + r2 * r2)) * math.log(r1) if r1 > 0.0 else 0.0

    def lower(r2: float, r1: float) -> float:
        return base(r2, r1) * math.log(r1 * c) if r1 > 0.0 else 0.0

    def upper(r2: float, r1: float) -> float:
        return base(r2, r1) * math.log(r2 * s) if r2 > 0.0 else 0.0

    total, err_total = 0.0, 0.0
    if c > 0.0:
        bound = (lambda r1: r1 * c / s) if s > 0.0 else (lambda r1: inf)
        val, err = integrate.dblquad(lower, 0.0, inf, 0.0, bound, epsabs=1e-11, epsrel=1e-11)
        total += val
        err_total += err
    if s > 0.0:
        start = (lambda r1: r1 * c / s)
        val, err = integrate.dblquad(upper, 0.0, inf, start, inf, epsabs=1e-11, epsrel=1e-11)
        total += val
        err_total += err
    if err_total > QUAD_TARGET:
        raise ConvergenceError("2-D quadrature did not converge", error_estimate=err_total)
    return 4.0 * total


def G2_quadrature(c: float, method: str = "polar") -> float:
    """G(cos theta) = E[log|c1| log|c1 cos theta + c2 sin theta|], absolute accuracy ~1e-9."""
    c = _check_cos(c)
    if method == "polar":
        return _G2_polar(c)
    if method == "cartesian":
        return _G2_cartesian(c)
    raise DomainError(f"unknown quadrature method {method!r} (expected 'polar' or 'cartesian')")


@dataclass(frozen=True)
class JensenConstants:
    C1: float          # G1(cos theta) = C1 + C2 log cos theta
    C2: float
    C: float           # I1 = C sin^2 theta
    C_prime: float     # d/dr G2(e^(-r^2/2)) = (r/2) log(1 - e^(-r^2)) + C' r
    C_double_prime_per_m: float   # C'' = 2m (C' - C2)

    def C_double_prime(self, m: int) -> float:
        return m * self.C_double_prime_per_m


def jensen_constants() -> JensenConstants:
    """Constants of the Jensen decomposition, from the rho-moments M0, M1, M2."""
    c1 = 2.0 * _M2 - 2.0 * _M1 + 0.5          # = (gamma^2 + pi^2/6) / 4
    c2 = 2.0 * _M1 - _M0                      # = -gamma / 2
    c = 0.5 * _M1                             # = (1 - gamma) / 8
    c_prime = 4.0 * c - 0.5                   # = -gamma / 2
    # -2m C2 from G1 and 2m C' from G2; they cancel since C' = C2
    return JensenConstants(C1=c1, C2=c2, C=c, C_prime=c_prime,
                           C_double_prime_per_m=2.0 * (c_prime - c2))


def jensen_split(c: float) -> Tuple[float, float]:
    """(G1, G2) with G = G1 + G2; G1 closed form, G2 the log^+(tan phi tan theta) piece."""
    c = _check_cos(c)
    consts = jensen_constants()
    if c == 0.0:
        g1 = -np.inf
    else:
        g1 = consts.C1 + consts.C2 * math.log(c)
    s = math.sqrt(max(0.0, 1.0 - c * c))
    if s == 0.0:
        return g1, 0.0
    if c == 0.0:
        return g1, np.inf
    tan_theta = s / c
    phi_switch = math.atan2(c, s)

    def integrand(phi: float) -> float:
        cp, sp = math.cos(phi), math.sin(phi)
        if cp <= 0.0:
            return 0.0
        return cp * sp * (_M1 + math.log(cp) * _M0) * math.log(math.tan(phi) * tan_theta)

    return g1, 4.0 * _quad(integrand, phi_switch, 0.5 * math.pi)


# ============================================================
# Radial derivatives of tabulated curves
# ============================================================

def tabulate(fn: Callable[[float], float], grid: Sequence[float]) -> CorrelationCurve:
    grid_arr = np.asarray(grid, dtype=float)
    return CorrelationCurve(grid_arr, np.array([fn(float(r)) for r in grid_arr]))


def _central(values: np.ndarray, i: int, step_idx: int, h: float, order: int) -> float:
    lo, mid, hi = values[i - step_idx], values[i], values[i + step_idx]
    if order == 1:
        return (hi - lo) / (2.0 * h)
    return (hi - 2.0 * mid + lo) / (h * h)


def numeric_radial_derivative(curve: CorrelationCurve, order: int, r: float,
                              rtol: float = DERIVATIVE_RTOL) -> DerivativeEstimate:
    """Richardson-extrapolated central difference of order 1 or 2 at a grid node r."""
    if order not in (1, 2):
        raise DomainError(f"derivative order must be 1 or 2, got {order}")
    grid, values = curve.grid, curve.values
    i = int(np.argmin(np.abs(grid - r)))
    if abs(grid[i] - r) > 1e-12 * max(1.0, abs(r)):
        raise DomainError(f"r={r} is not a node of the curve grid")
    if i < 2 or i > grid.size - 3:
        raise DomainError(f"r={r} needs two grid nodes on each side")
    h = grid[i + 1] - grid[i]
    spacing = np.diff(grid[i - 2:i + 3])
    if not np.allclose(spacing, h, rtol=1e-9, atol=0.0):
        raise DomainError(f"grid is not uniform around r={r}")

    coarse = _central(values, i, 2, 2.0 * h, order)
    fine = _central(values, i, 1, h, order)
    value = (4.0 * fine - coarse) / 3.0
    error = abs(fine - coarse) / 3.0
    scale = max(1.0, abs(value))
    if error > rtol * scale:
        # the Richardson error behaves like h^2: shrink until it meets the tolerance
        required = h * math.sqrt(rtol * scale / error)
        raise GridTooCoarseError(f"derivative error {error:.2e} at r={r} exceeds {rtol:.0e}", required)
    return DerivativeEstimate(value=value, step=h, error=error)


def radial_laplacian(curve: CorrelationCurve, r: float, m: int = 1,
                     rtol: float = DERIVATIVE_RTOL) -> DerivativeEstimate:
    """(d^2/dr^2 + (2m-1)/r d/dr) of a radial function on C^m, applied numerically."""
    if r <= 0:
        raise DomainError("radial_laplacian requires r > 0")
    d1 = numeric_radial_derivative(curve, 1, r, rtol)
    d2 = numeric_radial_derivative(curve, 2, r, rtol)
    coeff = (2 * m - 1) / r
    return DerivativeEstimate(value=d2.value + coeff * d1.value, step=d1.step,
                              error=d2.error + abs(coeff) * d1.error)


def G_of_separation(r: float) -> float:
    """G(e^(-r^2/2)): the n = 2 integral at scaled separation r."""
    return G2_quadrature(math.exp(-0.5 * r * r))


def fit_laplacian_constant(radii: Sequence[float], m: int = 1, step: float = 1e-2) -> List[float]:
    """Per-radius constant  Delta G(e^(-r^2/2)) - laplacian_G_closed(m, r)  from quadrature data.

    Each radius gets its own five-node stencil so that G is evaluated only where needed.
    """
    out = []
    for r in radii:
        grid = r + step * np.arange(-2, 3)
        curve = tabulate(G_of_separation, grid)
        lap = radial_laplacian(curve, float(grid[2]), m=m, rtol=1e-3)
        out.append(lap.value - laplacian_G_closed(m, float(grid[2])))
    return out
