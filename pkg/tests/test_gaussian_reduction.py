import math

import numpy as np
import pytest

from services.gaussian_reduction import (
    G2_quadrature,
    G_full_mc,
    G_of_separation,
    Gn_monte_carlo,
    fit_laplacian_constant,
    gram_matrix,
    gram_to_xi,
    jensen_constants,
    jensen_split,
    numeric_radial_derivative,
    radial_laplacian,
    tabulate,
)
from records.models import CorrelationCurve
from utils.errors import CoincidentConfigurationError, DomainError, GridTooCoarseError
from utils.rng import standard_complex_normal, stream_generator

EULER = float(np.euler_gamma)
G_ONE = (EULER ** 2 + math.pi ** 2 / 6.0) / 4.0
G_ZERO = EULER ** 2 / 4.0
BAND = 4.0


def _unit_vectors(seed, n, d):
    x = standard_complex_normal(stream_generator(seed, 0), (n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _within(est, target, band=BAND):
    return abs(est.value - target) <= band * est.stderr


# ---------- xi frame

def test_identity_gram_gives_identity_frame():
    np.testing.assert_allclose(gram_to_xi(np.eye(3)), np.eye(3), atol=0)


def test_two_point_frame():
    c = 1.0 / math.sqrt(2.0)
    xi = gram_to_xi([[1.0, c], [c, 1.0]])
    assert xi[1, 0] == pytest.approx(c, abs=1e-15)
    assert xi[1, 1] == pytest.approx(c, abs=1e-15)
    assert xi[0, 1] == 0


def test_frame_reproduces_gram():
    g = gram_matrix(_unit_vectors(11, 3, 5))
    xi = gram_to_xi(g)
    np.testing.assert_allclose(xi @ xi.conj().T, g, atol=1e-13)
    assert np.all(np.triu(xi, 1) == 0)
    assert np.all(np.diag(xi).real > 0) and np.all(np.diag(xi).imag == 0)
    np.testing.assert_allclose(np.linalg.norm(xi, axis=1), 1.0, atol=1e-14)


def test_coincident_points_report_row():
    x = _unit_vectors(5, 2, 3)
    vectors = np.vstack([x, x[:1]])
    with pytest.raises(CoincidentConfigurationError) as info:
        gram_to_xi(gram_matrix(vectors))
    assert info.value.index == 2


@pytest.mark.parametrize("bad", [
    [[1.0, 0.5], [0.2, 1.0]],
    [[2.0, 0.0], [0.0, 1.0]],
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
])
def test_invalid_gram_is_rejected(bad):
    with pytest.raises(DomainError):
        gram_to_xi(bad)


# ---------- Monte Carlo

def test_one_dimensional_mean():
    est = Gn_monte_carlo([[1.0]], 200_000, seed=1)
    assert _within(est, -EULER / 2.0)
    assert est.samples == 200_000 and est.seed == 1


def test_independent_pair():
    est = Gn_monte_carlo(np.eye(2), 400_000, seed=2)
    assert _within(est, G_ZERO)


def test_identity_triple_is_a_product():
    est = Gn_monte_carlo(np.eye(3), 400_000, seed=3)
    assert _within(est, (-EULER / 2.0) ** 3)


def test_stderr_shrinks_like_inverse_square_root():
    xi = gram_to_xi([[1.0, 0.5], [0.5, 1.0]])
    small = Gn_monte_carlo(xi, 50_000, seed=12)
    large = Gn_monte_carlo(xi, 800_000, seed=13)
    ratio = small.stderr / large.stderr
    assert 4.0 / 1.5 <= ratio <= 4.0 * 1.5


def test_monte_carlo_ignores_worker_count():
    xi = gram_to_xi(gram_matrix(_unit_vectors(4, 3, 3)))
    serial = Gn_monte_carlo(xi, 100_000, seed=9, workers=1)
    threaded = Gn_monte_carlo(xi, 100_000, seed=9, workers=4)
    assert serial.value == threaded.value
    assert serial.stderr == threaded.stderr


def test_phase_of_xi_entries_does_not_matter():
    c = math.exp(-0.5)
    s = math.sqrt(1.0 - c * c)
    real = np.array([[1.0, 0.0], [c, s]], dtype=complex)
    rotated = np.array([[1.0, 0.0], [c * np.exp(1.3j), s]], dtype=complex)
    a = Gn_monte_carlo(real, 400_000, seed=21)
    b = Gn_monte_carlo(rotated, 400_000, seed=22)
    assert abs(a.value - b.value) <= BAND * math.hypot(a.stderr, b.stderr)


def test_non_triangular_xi_is_rejected():
    with pytest.raises(DomainError):
        Gn_monte_carlo([[1.0, 0.1], [0.0, 1.0]], 10, seed=0)


def test_full_mc_single_vector_in_seven_dimensions():
    est = G_full_mc(_unit_vectors(6, 1, 7), 200_000, seed=4)
    assert _within(est, -EULER / 2.0)


def test_full_mc_coincident_pair():
    x = _unit_vectors(7, 1, 3)
    est = G_full_mc(np.vstack([x, x]), 200_000, seed=5)
    assert _within(est, G_ONE)


def test_full_mc_orthogonal_pair():
    x = np.zeros((2, 4), dtype=complex)
    x[0, 1] = 1.0
    x[1, 3] = 1j
    est = G_full_mc(x, 400_000, seed=6)
    assert _within(est, G_ZERO)


def test_full_mc_matches_reduced_integral():
    x = _unit_vectors(8, 3, 5)
    reduced = Gn_monte_carlo(gram_to_xi(gram_matrix(x)), 300_000, seed=30)
    full = G_full_mc(x, 300_000, seed=31)
    assert abs(reduced.value - full.value) <= BAND * math.hypot(reduced.stderr, full.stderr)


def test_full_mc_needs_room():
    with pytest.raises(DomainError):
        G_full_mc(_unit_vectors(1, 3, 2), 10, seed=0)


# ---------- n = 2 quadrature

def test_quadrature_endpoints():
    assert G2_quadrature(1.0) == pytest.approx(0.49452800, abs=1e-7)
    assert G2_quadrature(1.0) == pytest.approx(G_ONE, abs=1e-9)
    assert G2_quadrature(0.0) == pytest.approx(0.08329455, abs=1e-7)
    assert G2_quadrature(0.0) == pytest.approx(G_ZERO, abs=1e-9)


@pytest.mark.parametrize("c", [0.0, 0.2, math.exp(-0.5), 0.9, 1.0])
def test_polar_and_cartesian_agree(c):
    assert G2_quadrature(c, method="polar") == pytest.approx(G2_quadrature(c, method="cartesian"), abs=1e-8)


def test_quadrature_matches_monte_carlo():
    c = math.exp(-0.5)
    xi = np.array([[1.0, 0.0], [c, math.sqrt(1.0 - c * c)]], dtype=complex)
    assert _within(Gn_monte_carlo(xi, 1_000_000, seed=42), G2_quadrature(c))


def test_quadrature_is_monotone_in_cosine():
    values = [G2_quadrature(c) for c in np.linspace(0.0, 1.0, 6)]
    assert np.all(np.diff(values) > 0)


def test_quadrature_domain():
    with pytest.raises(DomainError):
        G2_quadrature(1.2)
    with pytest.raises(DomainError):
        G2_quadrature(0.5, method="simpson")


# ---------- Jensen decomposition

def test_jensen_constants_closed_forms():
    k = jensen_constants()
    assert k.C1 == pytest.approx(G_ONE, abs=1e-14)
    assert k.C2 == pytest.approx(-EULER / 2.0, abs=1e-14)
    assert k.C == pytest.approx((1.0 - EULER) / 8.0, abs=1e-14)
    assert k.C_prime == pytest.approx(-EULER / 2.0, abs=1e-14)
    for m in (1, 2, 5):
        assert k.C_double_prime(m) == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("c", [0.1, 0.5, math.exp(-0.5), 0.95])
def test_jensen_split_recombines(c):
    g1, g2 = jensen_split(c)
    assert g1 + g2 == pytest.approx(G2_quadrature(c), abs=1e-9)


def test_jensen_split_coincident():
    g1, g2 = jensen_split(1.0)
    assert g2 == 0.0
    assert g1 == pytest.approx(G_ONE, abs=1e-14)


# ---------- radial derivatives

def test_derivative_of_constant_is_zero():
    curve = CorrelationCurve(np.linspace(0.0, 1.0, 11), np.full(11, 3.0))
    assert numeric_radial_derivative(curve, 1, 0.5).value == 0.0


def test_second_derivative_of_square():
    grid = np.linspace(0.0, 2.0, 21)
    curve = tabulate(lambda r: r * r, grid)
    for r in grid[2:-2]:
        assert numeric_radial_derivative(curve, 2, float(r)).value == pytest.approx(2.0, abs=1e-8)


def test_laplacian_of_square_in_the_plane():
    grid = np.linspace(0.5, 1.5, 11)
    curve = tabulate(lambda r: r * r, grid)
    # Delta |z|^2 = 4 on C, 4m on C^m
    assert radial_laplacian(curve, float(grid[5]), m=1).value == pytest.approx(4.0, abs=1e-8)
    assert radial_laplacian(curve, float(grid[5]), m=3).value == pytest.approx(12.0, abs=1e-8)


def test_coarse_grid_reports_required_step():
    grid = np.linspace(0.0, 6.0, 13)
    curve = tabulate(math.sin, grid)
    with pytest.raises(GridTooCoarseError) as info:
        numeric_radial_derivative(curve, 2, float(grid[6]))
    assert 0.0 < info.value.required_step < 0.5


def test_derivative_needs_interior_node():
    curve = tabulate(math.cos, np.linspace(0.0, 1.0, 11))
    with pytest.raises(DomainError):
        numeric_radial_derivative(curve, 1, 0.1)
    with pytest.raises(DomainError):
        numeric_radial_derivative(curve, 1, 0.55)
    with pytest.raises(DomainError):
        numeric_radial_derivative(curve, 3, 0.5)


def test_first_derivative_constant_is_recovered():
    k = jensen_constants()
    h = 1e-2
    recovered = []
    for r in (0.8, 1.0, 1.5):
        curve = tabulate(G_of_separation, r + h * np.arange(-2, 3))
        d1 = numeric_radial_derivative(curve, 1, float(curve.grid[2]), rtol=1e-4)
        rr = float(curve.grid[2])
        recovered.append((d1.value - 0.5 * rr * math.log(-math.expm1(-rr * rr))) / rr)
    assert max(recovered) - min(recovered) < 1e-5
    # G2 alone carries C' r; the C2 log cos(theta) = -C2 r^2 / 2 part of G1 cancels it
    assert abs(np.mean(recovered)) < 1e-5
    assert k.C_prime - k.C2 == pytest.approx(0.0, abs=1e-14)


def test_laplacian_of_quadrature_matches_closed_form():
    consts = np.asarray(fit_laplacian_constant(np.linspace(0.5, 2.5, 5)))
    assert np.max(np.abs(consts - consts.mean())) < 1e-4
    assert abs(consts.mean()) < 1e-4


def test_laplacian_constant_vanishes_in_two_dimensions():
    consts = np.asarray(fit_laplacian_constant([0.7, 1.5, 2.3], m=2))
    assert np.max(np.abs(consts)) < 1e-4
