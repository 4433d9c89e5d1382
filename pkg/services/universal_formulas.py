# services/universal_formulas.py
"""Closed-form scaling limits of zero correlations.

All functions accept a scalar or a numpy array for their real argument and
return the same shape (a Python float for scalar input). The fixed convention
between the separation ``r = |z - w|`` and the argument ``t`` of the pair
functions is ``t = r**2 / 2``.
"""
from __future__ import annotations

import logging
import math
from typing import Optional, Sequence, Union

import numpy as np
from scipy import integrate

from records.models import CorrelationCurve, DiagonalAtom
from utils.errors import DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, Sequence[float], np.ndarray]

# ---------- Constants (single source of truth)
SERIES_CROSSOVER = 5e-2           # t below this uses the series; the closed form cancels like eps / t
# Laurent coefficients of coth t at t^(2k-1), k = 1..4
_COTH_COEFFS = (1.0 / 3.0, -1.0 / 45.0, 2.0 / 945.0, -1.0 / 4725.0)


def _check_dimension(m: int) -> int:
    if isinstance(m, bool) or int(m) != m or m < 1:
        raise DomainError(f"dimension m must be a positive integer, got {m!r}")
    return int(m)


def _to_array(x: ArrayLike):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


def _out(arr: np.ndarray, scalar: bool):
    return float(arr) if scalar else arr


# ---------- Pair functions H and gamma_m

def gamma_m_series(m: int, t: ArrayLike, terms: Optional[int] = None):
    """Small-t expansion of gamma_m (H for m = 1).

    (m-1)/(2m) t^-1 + (m-1)/(2m) + sum_k c_k (m+2k)(m+2k-1)/(2m^2) t^(2k-1),
    c_k the Laurent coefficients of coth. ``terms`` limits the sum (default: all four).
    """
    m = _check_dimension(m)
    t_arr, scalar = _to_array(t)
    n_terms = len(_COTH_COEFFS) if terms is None else int(terms)
    with np.errstate(divide="ignore"):
        head = (m - 1) / (2.0 * m) * (1.0 / t_arr + 1.0) if m > 1 else np.zeros_like(t_arr)
    tail = np.zeros_like(t_arr)
    for k, c_k in enumerate(_COTH_COEFFS[:n_terms], start=1):
        tail = tail + c_k * (m + 2 * k) * (m + 2 * k - 1) / (2.0 * m * m) * t_arr ** (2 * k - 1)
    return _out(head + tail, scalar)


def _closed_form(m: int, t: np.ndarray) -> np.ndarray:
    # ([1/2(m^2+m) sinh^2 t + t^2] cosh t - (m+1) t sinh t) / (m^2 sinh^3 t) + (m-1)/(2m),
    # divided through by sinh^3 so that large t cannot overflow
    with np.errstate(over="ignore"):
        coth = 1.0 / np.tanh(t)
        csch2 = 1.0 / np.sinh(t) ** 2
    body = 0.5 * (m * m + m) * coth + t * t * coth * csch2 - (m + 1) * t * csch2
    return body / (m * m) + (m - 1) / (2.0 * m)


def _pair_function(m: int, t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    small = t < SERIES_CROSSOVER
    if np.any(small):
        out[small] = gamma_m_series(m, t[small])
    if np.any(~small):
        out[~small] = _closed_form(m, t[~small])
    return out


def hannay_H(t: ArrayLike):
    """H(t) = ((sinh^2 t + t^2) cosh t - 2t sinh t) / sinh^3 t, with H(0) = 0."""
    t_arr, scalar = _to_array(t)
    if np.any(t_arr < 0) or np.any(np.isnan(t_arr)):
        raise DomainError("hannay_H requires t >= 0")
    return _out(_pair_function(1, np.atleast_1d(t_arr)).reshape(t_arr.shape), scalar)


def gamma_m(m: int, t: ArrayLike):
    """Normalized limit pair correlation of codimension-one zero sets in dimension m.

    Singular at t = 0 for m > 1 (a pole of residue (m-1)/(2m)); for m = 1 it is
    Hannay's function and t = 0 is allowed.
    """
    m = _check_dimension(m)
    t_arr, scalar = _to_array(t)
    if m == 1:
        return hannay_H(t)
    if np.any(~(t_arr > 0)):
        raise DomainError(f"gamma_m with m={m} has a pole at t=0; requires t > 0")
    return _out(_pair_function(m, np.atleast_1d(t_arr)).reshape(t_arr.shape), scalar)


# ---------- Kernel and the radial pipeline

def limit_kernel_modulus(z, w):
    """exp(-|z - w|^2 / 2): the scaled limit of the normalized kernel modulus.

    Points are complex scalars (m = 1) or arrays whose last axis holds the m coordinates.
    """
    z_arr = np.asarray(z, dtype=complex)
    w_arr = np.asarray(w, dtype=complex)
    diff = z_arr - w_arr
    dist2 = np.abs(diff) ** 2 if diff.ndim == 0 else np.sum(np.abs(diff) ** 2, axis=-1)
    if not np.all(np.isfinite(dist2)):
        raise DomainError("limit_kernel_modulus requires finite coordinates")
    res = np.exp(-0.5 * dist2)
    return float(res) if np.ndim(res) == 0 else res


def _check_radius(r: ArrayLike, name: str):
    r_arr, scalar = _to_array(r)
    if np.any(~(r_arr > 0)):
        raise DomainError(f"{name} requires r > 0 (the diagonal r = 0 is excluded)")
    return r_arr, scalar


def laplacian_G_closed(m: int, r: ArrayLike):
    """m log(1 - e^-r^2) + r^2 / (e^r^2 - 1): the radial Laplacian of G(e^(-r^2/2)).

    The additive constant of the general derivation vanishes identically (see
    services.gaussian_reduction.jensen_constants), so no convention is hidden here.
    """
    m = _check_dimension(m)
    r_arr, scalar = _check_radius(r, "laplacian_G_closed")
    r2 = r_arr * r_arr
    with np.errstate(over="ignore"):
        res = m * np.log(-np.expm1(-r2)) + r2 / np.expm1(r2)
    return _out(res, scalar)


def bilaplacian_G_closed(r: ArrayLike):
    """Smooth part (r > 0) of the bi-Laplacian of G(e^(-r^2/2)) in dimension one.

    The atom 4*pi*delta_0 at r = 0 is not representable here; see diagonal_atom.
    Written in u = e^(r^2) - 1 and q = e^(r^2)/u so that neither tail overflows.
    Below r^2/2 = SERIES_CROSSOVER the terms of order 8/r^2 cancel, so the value is
    taken as 4 (H(r^2/2) - 1) from the series of H.
    """
    r_arr, scalar = _check_radius(r, "bilaplacian_G_closed")
    r2 = np.atleast_1d(r_arr * r_arr)
    res = np.empty_like(r2)
    small = 0.5 * r2 < SERIES_CROSSOVER
    if np.any(small):
        res[small] = 4.0 * (gamma_m_series(1, 0.5 * r2[small]) - 1.0)
    if np.any(~small):
        big = r2[~small]
        with np.errstate(over="ignore"):
            u = np.expm1(big)
            inv_u = 1.0 / u
        q = -1.0 / np.expm1(-big)
        res[~small] = 8.0 * inv_u - 16.0 * big * q * inv_u + 4.0 * big * big * q * (1.0 + 2.0 * inv_u) * inv_u
    return _out(res.reshape(np.shape(r_arr)), scalar)


# ---------- Densities

def expected_density(m: int) -> float:
    """Scaled limit density of zeros per unit Euclidean volume of C^m."""
    return _check_dimension(m) / math.pi


def diagonal_atom(m: int) -> Optional[DiagonalAtom]:
    """The self-pair atom of the limit two-point measure (dimension one only)."""
    return DiagonalAtom(mass=math.pi) if _check_dimension(m) == 1 else None


def limit_pair_density(m: int, r: ArrayLike):
    """Off-diagonal normalized pair correlation K2 / (K1 x K1) at separation r."""
    m = _check_dimension(m)
    r_arr, scalar = _check_radius(r, "limit_pair_density")
    t = 0.5 * r_arr * r_arr
    res = hannay_H(t) if m == 1 else gamma_m(m, t)
    return _out(np.asarray(res, dtype=float), scalar)


def theory_curve(m: int, grid: Sequence[float]) -> CorrelationCurve:
    grid_arr = np.asarray(grid, dtype=float)
    if grid_arr.size == 0:
        return CorrelationCurve(grid_arr, grid_arr.copy())
    return CorrelationCurve(grid_arr, np.asarray(limit_pair_density(m, grid_arr), dtype=float))


def binned_limit_pair_density(m: int, edges: Sequence[float]) -> np.ndarray:
    """Annulus average of the limit pair density over each bin [e_k, e_k+1).

    This is the quantity a binned pair-correlation estimator converges to.
    """
    m = _check_dimension(m)
    edges_arr = np.asarray(edges, dtype=float)
    if edges_arr.size < 2 or np.any(np.diff(edges_arr) <= 0) or edges_arr[0] < 0:
        raise DomainError("bin edges must be ascending and nonnegative")
    if m > 1 and edges_arr[0] == 0:
        raise DomainError("the first bin touches the pole of gamma_m at r = 0")
    out = np.empty(edges_arr.size - 1)
    for k, (lo, hi) in enumerate(zip(edges_arr[:-1], edges_arr[1:])):
        mass, _ = integrate.quad(lambda r: r * limit_pair_density(m, r) if r > 0 else 0.0,
                                 lo, hi, epsabs=1e-13, epsrel=1e-12)
        out[k] = 2.0 * mass / (hi * hi - lo * lo)
    return out
