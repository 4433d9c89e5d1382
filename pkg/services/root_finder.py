# services/root_finder.py
"""Aberth-Ehrlich simultaneous iteration for univariate complex polynomials.

Coefficients are given in ascending order, a[k] multiplies z^k, optionally with a
separate log magnitude so that a[k] = coeffs[k] * exp(log_scale[k]). Coefficients that
fit in double precision are evaluated by Horner's rule, through the reversed polynomial
when |z| > 1 so that z^N never overflows. Coefficients spanning more than double range
are summed term by term relative to the largest |a_k z^k|. Convergence is judged by the
backward error |p(z)| / sum |a_k||z|^k in both cases.
"""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from utils.errors import ConvergenceError, DegenerateLeadingCoefficientError

logger = logging.getLogger(__name__)

# ---------- Constants (single source of truth)
MAX_ITER = 500
POLISH_STEPS = 2
RESIDUAL_TOL = 1e-10
CLUSTER_RESIDUAL_TOL = 1e-7
CLUSTER_TOL = 1e-4            # relative distance below which roots are flagged as clustered
DIRECT_LOG_SPAN = 600.0       # max log|a_k| - min log|a_k| handled by plain Horner evaluation
LOG_TINY = -745.0             # exp() of anything smaller is zero in double precision
_EPS = float(np.finfo(np.float64).eps)
_ANGLE_OFFSET = 0.7           # breaks the symmetry of the initial circles


@njit(cache=True, nogil=True)
def _horner(a, abs_a, z):
    n = a.shape[0] - 1
    if abs(z) <= 1.0:
        p = a[n]
        dp = 0j
        s = abs_a[n]
        az = abs(z)
        for k in range(n - 1, -1, -1):
            dp = dp * z + p
            p = p * z + a[k]
            s = s * az + abs_a[k]
        backward = abs(p) / s if s > 0.0 else 0.0
        if p == 0j:
            return 0j, 0.0
        if dp == 0j:
            return p, backward
        return p / dp, backward
    # reversed polynomial q(y) = y^n p(1/y), p'/p = y (n - y q'(y)/q(y))
    y = 1.0 / z
    q = a[0]
    dq = 0j
    s = abs_a[0]
    ay = abs(y)
    for k in range(1, n + 1):
        dq = dq * y + q
        q = q * y + a[k]
        s = s * ay + abs_a[k]
    backward = abs(q) / s if s > 0.0 else 0.0
    if q == 0j:
        return 0j, 0.0
    denom = y * (n - y * dq / q)
    if denom == 0j:
        return z * 1e-8, backward
    return 1.0 / denom, backward


@njit(cache=True, nogil=True)
def _scaled_sum(c, log_mag, z):
    """p/p' and backward error for a_k = c_k exp(log_mag_k), |c_k| in {0, 1}."""
    n = c.shape[0] - 1
    if z == 0j:
        if c[1] == 0j:
            return z + 1e-8, 1.0
        return (c[0] / c[1]) * math.exp(log_mag[0] - log_mag[1]), 1.0
    lz = math.log(abs(z))
    theta = cmath.phase(z)
    top = -np.inf
    for k in range(n + 1):
        if c[k] != 0j:
            top = max(top, log_mag[k] + k * lz)
    s0 = 0j
    s1 = 0j
    s = 0.0
    for k in range(n + 1):
        if c[k] == 0j:
            continue
        t = log_mag[k] + k * lz - top
        if t < LOG_TINY:
            continue
        term = c[k] * cmath.exp(complex(t, k * theta))
        s0 += term
        s1 += k * term
        s += math.exp(t)
    backward = abs(s0) / s
    if s0 == 0j:
        return 0j, 0.0
    if s1 == 0j:
        return s0, backward
    # z p'(z) = sum k a_k z^k
    return z * s0 / s1, backward


@njit(cache=True, nogil=True)
def _evaluate(a, abs_a, log_mag, z):
    """Return (p(z)/p'(z), backward error); an empty ``log_mag`` selects Horner's rule."""
    if log_mag.shape[0] == 0:
        return _horner(a, abs_a, z)
    return _scaled_sum(a, log_mag, z)


@njit(cache=True, nogil=True)
def _aberth(a, log_mag, x, stop, max_iter):
    n = x.shape[0]
    abs_a = np.abs(a)
    done = np.zeros(n, dtype=np.bool_)
    iterations = 0
    for it in range(max_iter):
        iterations = it + 1
        active = False
        for i in range(n):
            if done[i]:
                continue
            zi = x[i]
            ratio, backward = _evaluate(a, abs_a, log_mag, zi)
            if backward <= stop:
                done[i] = True
                continue
            acc = 0j
            for j in range(n):
                if j != i:
                    diff = zi - x[j]
                    if diff != 0j:
                        acc += 1.0 / diff
            correction = ratio / (1.0 - ratio * acc)
            x[i] = zi - correction
            active = True
        if not active:
            break
    return x, iterations


@njit(cache=True, nogil=True)
def _polish(a, log_mag, x, steps):
    abs_a = np.abs(a)
    residuals = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        zi = x[i]
        ratio, best = _evaluate(a, abs_a, log_mag, zi)
        for _ in range(steps):
            cand = zi - ratio
            r_new, b_new = _evaluate(a, abs_a, log_mag, cand)
            if b_new >= best:
                break
            zi, ratio, best = cand, r_new, b_new
        x[i] = zi
        residuals[i] = best
    return x, residuals


def _hull_guesses(idx: np.ndarray, logs: np.ndarray, n: int) -> np.ndarray:
    hull = []
    for k, lk in zip(idx, logs):
        while len(hull) >= 2:
            (k1, l1), (k2, l2) = hull[-2], hull[-1]
            # drop the middle point unless the hull turns clockwise (upper hull)
            if (l2 - l1) * (k - k1) <= (lk - l1) * (k2 - k1):
                hull.pop()
            else:
                break
        hull.append((k, lk))
    guesses = np.empty(n, dtype=complex)
    pos = 0
    for (k1, l1), (k2, l2) in zip(hull[:-1], hull[1:]):
        count = k2 - k1
        radius = math.exp((l1 - l2) / count)
        angles = 2.0 * math.pi * np.arange(count) / count + 2.0 * math.pi * k1 / n + _ANGLE_OFFSET
        guesses[pos:pos + count] = radius * np.exp(1j * angles)
        pos += count
    return guesses


def initial_guesses(a: np.ndarray, log_scale: Optional[np.ndarray] = None) -> np.ndarray:
    """Perturbed circles from the upper convex hull of (k, log|a_k|) (Newton polygon)."""
    mags = np.abs(a)
    idx = np.flatnonzero(mags > 0)
    logs = np.log(mags[idx])
    if log_scale is not None:
        logs = logs + np.asarray(log_scale, dtype=float)[idx]
    return _hull_guesses(idx, logs, a.size - 1)


@dataclass
class RootSet:
    """Roots with their backward errors.

    ``residuals[i]`` is |p(z_i)| / sum_k |a_k||z_i|^k, the relative size of the
    coefficient perturbation that makes z_i an exact root. It is scale-free, so it
    does not depend on how the coefficients were normalized.
    """
    roots: np.ndarray
    residuals: np.ndarray
    degree: int
    clustered: np.ndarray
    iterations: int = 0

    def __len__(self) -> int:
        return self.roots.size


def _cluster_flags(roots: np.ndarray) -> np.ndarray:
    if roots.size < 2:
        return np.zeros(roots.size, dtype=bool)
    dist = np.abs(roots[:, None] - roots[None, :])
    np.fill_diagonal(dist, np.inf)
    scale = np.maximum(1.0, np.abs(roots))
    return dist.min(axis=1) < CLUSTER_TOL * scale


def polynomial_roots(coeffs, log_scale=None) -> RootSet:
    """All roots of sum_k coeffs[k] exp(log_scale[k]) z^k; ``log_scale`` defaults to zero."""
    a = np.asarray(coeffs, dtype=np.complex128)
    degree = a.size - 1
    if degree < 1:
        raise ValueError("polynomial degree must be >= 1")
    mags = np.abs(a)
    nonzero = mags > 0
    if not nonzero.any():
        raise DegenerateLeadingCoefficientError("polynomial is identically zero")
    if not nonzero[-1]:
        raise DegenerateLeadingCoefficientError("leading coefficient is zero")
    if log_scale is None:
        log_scale = np.zeros(a.size)
    else:
        log_scale = np.asarray(log_scale, dtype=np.float64)
        if log_scale.shape != a.shape or not np.all(np.isfinite(log_scale)):
            raise ValueError("log_scale must be finite and match the coefficient shape")
    log_mag = np.full(a.size, -np.inf)
    log_mag[nonzero] = np.log(mags[nonzero]) + log_scale[nonzero]
    top = float(log_mag.max())
    span = top - float(log_mag[nonzero].min())

    # roots at the origin are split off exactly
    n_zero = int(np.argmax(nonzero))
    roots = np.zeros(degree, dtype=complex)
    residuals = np.zeros(degree)
    iterations = 0
    if degree > n_zero:
        n = degree - n_zero
        if span <= DIRECT_LOG_SPAN:
            core = np.ascontiguousarray((a * np.exp(log_scale - top))[n_zero:])
            core_log = np.empty(0)
            guesses = initial_guesses(core)
            stop = 4.0 * n * _EPS
        else:
            logger.debug("coefficients span exp(%.0f); using scaled summation", span)
            unit = np.zeros(a.size, dtype=complex)
            unit[nonzero] = a[nonzero] / mags[nonzero]
            core = np.ascontiguousarray(unit[n_zero:])
            core_log = np.ascontiguousarray(np.where(nonzero, log_mag - top, 0.0)[n_zero:])
            guesses = initial_guesses(core, core_log)
            stop = 16.0 * n * _EPS
        x, iterations = _aberth(core, core_log, guesses, stop, MAX_ITER)
        x, res = _polish(core, core_log, x, POLISH_STEPS)
        roots[n_zero:] = x
        residuals[n_zero:] = res
    clustered = _cluster_flags(roots)
    limit = np.where(clustered, CLUSTER_RESIDUAL_TOL, RESIDUAL_TOL)
    if np.any(~np.isfinite(roots)) or np.any(residuals > limit):
        worst = float(np.nanmax(residuals)) if residuals.size else float("nan")
        raise ConvergenceError(
            f"Aberth iteration did not converge in {MAX_ITER} iterations (worst residual {worst:.2e})",
            residuals=residuals,
        )
    if clustered.any():
        logger.warning("%d clustered roots flagged (degree %d)", int(clustered.sum()), degree)
    logger.debug("degree %d solved in %d Aberth sweeps", degree, iterations)
    return RootSet(roots=roots, residuals=residuals, degree=degree, clustered=clustered, iterations=iterations)
