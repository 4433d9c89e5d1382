import math

import mpmath as mp
import numpy as np
import pytest

from services import universal_formulas as uf
from services.gaussian_reduction import radial_laplacian, tabulate
from utils.errors import DomainError

mp.mp.dps = 50


def _H_mp(t):
    t = mp.mpf(t)
    s, c = mp.sinh(t), mp.cosh(t)
    return ((s ** 2 + t ** 2) * c - 2 * t * s) / s ** 3


def _gamma_mp(m, t):
    t = mp.mpf(t)
    s, c = mp.sinh(t), mp.cosh(t)
    body = (mp.mpf(m * m + m) / 2 * s ** 2 + t ** 2) * c - (m + 1) * t * s
    return body / (m * m * s ** 3) + mp.mpf(m - 1) / (2 * m)


# ---------- H and gamma_m

def test_hannay_at_zero_is_zero():
    assert uf.hannay_H(0.0) == 0.0


def test_hannay_series_value():
    assert uf.hannay_H(0.1) == pytest.approx(0.09977822, abs=1e-7)


def test_hannay_large_t_decorrelates():
    assert abs(uf.hannay_H(50.0) - 1.0) <= 1e-12


@pytest.mark.parametrize("t", [1e-3, 5e-3, 0.0099, 0.0101, 0.02, 0.049, 0.051, 0.3, 1.0, 2.5, 7.0, 30.0])
def test_hannay_matches_extended_precision(t):
    assert uf.hannay_H(t) == pytest.approx(float(_H_mp(t)), abs=1e-12)


@pytest.mark.parametrize("m", [2, 3, 5])
@pytest.mark.parametrize("t", [2e-3, 0.0101, 0.049, 0.05, 0.051, 0.7, 3.0, 20.0])
def test_gamma_matches_extended_precision(m, t):
    expected = float(_gamma_mp(m, t))
    assert uf.gamma_m(m, t) == pytest.approx(expected, rel=1e-11)


def test_series_remainder_bound():
    t = np.logspace(-3, math.log10(0.3), 50)
    poly = t - 2.0 / 9.0 * t ** 3 + 2.0 / 45.0 * t ** 5
    diff = np.abs(uf.hannay_H(t) - poly)
    # a few ulps of slack where 5 t^7 is below double resolution
    assert np.all(diff <= 5.0 * t ** 7 + 4.0 * np.spacing(poly))


def test_series_and_closed_form_meet_at_crossover():
    t = uf.SERIES_CROSSOVER
    for m in (1, 2, 4):
        series = uf.gamma_m_series(m, t)
        closed = float(_gamma_mp(m, t)) if m > 1 else float(_H_mp(t))
        assert series == pytest.approx(closed, rel=1e-13)


def test_hannay_error_is_flat_across_crossover():
    t = np.linspace(0.005, 0.2, 80)
    expected = np.array([float(_H_mp(x)) for x in t])
    assert np.max(np.abs(uf.hannay_H(t) - expected)) <= 3e-14


def test_gamma_one_is_hannay():
    t = np.logspace(-2, math.log10(50.0), 200)
    assert np.max(np.abs(uf.gamma_m(1, t) - uf.hannay_H(t))) <= 1e-12
    assert uf.gamma_m(1, 0.7) == uf.hannay_H(0.7)


def test_gamma_two_pole_residue():
    t = 1e-6
    assert uf.gamma_m(2, t) * t == pytest.approx(0.25, abs=1e-5)


@pytest.mark.parametrize("m", [1, 2, 3, 7])
def test_gamma_decorrelates(m):
    assert abs(uf.gamma_m(m, 60.0) - 1.0) <= 1e-10


def test_gamma_three_term_series():
    t = np.logspace(-3, -1, 40)
    for m in (2, 3, 5):
        three = uf.gamma_m_series(m, t, terms=1)
        coeff = (m + 4) * (m + 3) / (90.0 * m * m)
        assert np.max(np.abs(uf.gamma_m(m, t) - three) / t ** 3) <= 2.0 * coeff


def test_gamma_rejects_pole_and_negative():
    with pytest.raises(DomainError):
        uf.gamma_m(2, 0.0)
    with pytest.raises(DomainError):
        uf.hannay_H(-0.1)
    with pytest.raises(DomainError):
        uf.gamma_m(0, 1.0)


def test_vectorised_shape_is_preserved():
    t = np.linspace(0.0, 4.0, 12).reshape(3, 4)
    out = uf.hannay_H(t)
    assert out.shape == (3, 4)
    assert out[0, 0] == 0.0


# ---------- kernel

def test_kernel_examples():
    assert uf.limit_kernel_modulus(0.3 + 0.2j, 0.3 + 0.2j) == 1.0
    assert uf.limit_kernel_modulus(0.0, 1.0) == pytest.approx(0.60653066, abs=1e-8)
    z = np.array([1.0, 0.0], dtype=complex)
    w = np.array([0.0, 1.0], dtype=complex)
    assert uf.limit_kernel_modulus(z, w) == pytest.approx(0.36787944, abs=1e-8)


def test_kernel_symmetry_and_translation():
    rng = np.random.default_rng(3)
    z = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    w = rng.normal(size=(20, 2)) + 1j * rng.normal(size=(20, 2))
    a = np.array([0.7 - 1.1j, -2.0 + 0.5j])
    k = uf.limit_kernel_modulus(z, w)
    np.testing.assert_allclose(k, uf.limit_kernel_modulus(w, z), rtol=0, atol=0)
    np.testing.assert_allclose(k, uf.limit_kernel_modulus(z + a, w + a), rtol=1e-12)
    assert np.all(k < 1.0)


def test_kernel_rejects_nonfinite():
    with pytest.raises(DomainError):
        uf.limit_kernel_modulus(complex(np.inf, 0), 0.0)


# ---------- Laplacians

def test_laplacian_examples():
    assert uf.laplacian_G_closed(1, 1.0) == pytest.approx(0.12330156, abs=1e-8)
    assert uf.laplacian_G_closed(2, 1.0) == pytest.approx(-0.33537358, abs=1e-8)
    assert abs(uf.laplacian_G_closed(1, 40.0)) < 1e-12


def test_laplacian_rejects_diagonal():
    with pytest.raises(DomainError):
        uf.laplacian_G_closed(1, 0.0)
    with pytest.raises(DomainError):
        uf.bilaplacian_G_closed(np.array([0.5, 0.0]))


def test_bilaplacian_identity():
    r = np.linspace(0.05, 5.0, 400)
    lhs = 1.0 + 0.25 * uf.bilaplacian_G_closed(r)
    assert np.max(np.abs(lhs - uf.hannay_H(0.5 * r * r))) <= 1e-10


def test_bilaplacian_at_one_matches_oracle():
    expected = 4.0 * (float(_H_mp(0.5)) - 1.0)
    assert uf.bilaplacian_G_closed(1.0) == pytest.approx(expected, abs=1e-12)


def _bilaplacian_mp(r):
    r2 = mp.mpf(r) ** 2
    u = mp.expm1(r2)
    q = mp.exp(r2) / u
    return 8 / u - 16 * r2 * q / u + 4 * r2 ** 2 * q * (1 + 2 / u) / u


@pytest.mark.parametrize("r", [1e-5, 1e-3, 0.05, 0.2, 0.31, 0.32, 0.35])
def test_bilaplacian_small_radius_matches_extended_precision(r):
    assert uf.bilaplacian_G_closed(r) == pytest.approx(float(_bilaplacian_mp(r)), abs=1e-13)


def test_bilaplacian_small_radius_keeps_shape():
    r = np.array([[1e-4, 0.2], [0.5, 2.0]])
    out = uf.bilaplacian_G_closed(r)
    assert out.shape == (2, 2)
    assert out[0, 0] == pytest.approx(-4.0, abs=1e-7)


def test_bilaplacian_vanishes_at_infinity():
    assert abs(uf.bilaplacian_G_closed(30.0)) < 1e-12


@pytest.mark.parametrize("r", [0.5, 1.0, 1.7, 2.4, 3.0])
def test_numeric_laplacian_of_closed_form(r):
    h = 1e-3
    curve = tabulate(lambda x: uf.laplacian_G_closed(1, x), r + h * np.arange(-2, 3))
    est = radial_laplacian(curve, float(curve.grid[2]), m=1, rtol=1e-3)
    expected = uf.bilaplacian_G_closed(float(curve.grid[2]))
    assert abs(est.value - expected) <= 1e-6 * max(1.0, abs(expected))


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("r", [0.7, 1.2, 2.0])
def test_gamma_from_laplacian_of_closed_form(m, r):
    h = 1e-3
    curve = tabulate(lambda x: uf.laplacian_G_closed(m, x), r + h * np.arange(-2, 3))
    rr = float(curve.grid[2])
    est = radial_laplacian(curve, rr, m=m, rtol=1e-3)
    assert 1.0 + est.value / (4.0 * m * m) == pytest.approx(uf.gamma_m(m, 0.5 * rr * rr), rel=1e-7)


# ---------- densities and curves

@pytest.mark.parametrize("m", [1, 2, 10])
def test_expected_density(m):
    assert uf.expected_density(m) == pytest.approx(m / math.pi, rel=1e-15)


def test_diagonal_atom_only_in_dimension_one():
    atom = uf.diagonal_atom(1)
    assert atom is not None and atom.mass == pytest.approx(math.pi)
    assert uf.diagonal_atom(2) is None


def test_limit_pair_density_examples():
    assert uf.limit_pair_density(1, 0.1) == pytest.approx(0.005, abs=1e-6)
    assert uf.limit_pair_density(1, 12.0) == pytest.approx(1.0, abs=1e-12)
    assert uf.limit_pair_density(2, 0.1) == pytest.approx(50.25, abs=1e-2)


def test_theory_curve():
    curve = uf.theory_curve(1, [1.0])
    assert curve.values[0] == uf.hannay_H(0.5)
    assert curve.stderr[0] == 0.0
    assert len(uf.theory_curve(1, [])) == 0


def test_binned_density_is_annulus_average():
    edges = np.array([0.1, 0.3, 1.0, 3.0])
    binned = uf.binned_limit_pair_density(1, edges)
    for k, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        f = lambda r: r * _H_mp(r * r / 2)
        expected = 2 * mp.quad(f, [lo, hi]) / (hi * hi - lo * lo)
        assert binned[k] == pytest.approx(float(expected), rel=1e-9)
