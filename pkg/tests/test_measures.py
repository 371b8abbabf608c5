import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from logbm import fixtures as fx
from logbm.geometry import LowerDimensionalError, OriginOutsideError, VPolytope, direct_sum, scale, volume
from logbm.measures import (
    RadialProfile,
    SphericalAtomMeasure,
    cone_volume_measure,
    gaussian_measure,
    gaussian_samples_stats,
    log_minkowski_gap,
    log_support_integral,
    match_atoms,
    prekopa_leindler_check,
    radial_logconcave_measure,
    surface_area_measure,
)

N_MC = 10**6

POLYTOPES = [fx.cube(3), fx.cross_polytope(3), fx.hexagon(), fx.square(), fx.cross_polytope(4), fx.cube(4),
             fx.box([1, 2, 0.5]), fx.regular_polygon(7), fx.random_unconditional(3, 6, np.random.default_rng(1))]


class Disk:
    """Membership-only round disk (independent of the polytope code)."""

    dim = 2

    def __init__(self, r):
        self.r = r
        self.circumradius = r

    def contains(self, X):
        return np.einsum("ij,ij->i", X, X) <= self.r ** 2


# --- atom measures ----------------------------------------------------------

def test_surface_area_examples():
    S = surface_area_measure(fx.cube(3))
    assert len(S) == 6 and np.allclose(S.weights, 4)
    S = surface_area_measure(fx.cross_polytope(3))
    assert len(S) == 8 and np.allclose(S.weights, np.sqrt(3) / 2)
    assert np.allclose(np.abs(S.directions), 1 / np.sqrt(3))
    with pytest.raises(LowerDimensionalError):
        surface_area_measure(VPolytope(np.array([[0, 0, 0], [1, 0, 0.0]])))


def test_cone_volume_examples():
    V = cone_volume_measure(fx.cube(3))
    assert np.allclose(V.weights, 4 / 3) and V.total == pytest.approx(8)
    V2 = cone_volume_measure(scale(fx.cube(3), 2.0))
    assert np.allclose(V2.weights, 8 * V.weights)
    with pytest.raises(OriginOutsideError):
        cone_volume_measure(VPolytope(np.array([[0, 0], [1, 0], [0, 1.0]])))


@pytest.mark.parametrize("P", POLYTOPES)
def test_cone_volume_total_mass(P):
    assert cone_volume_measure(P).total == pytest.approx(volume(P), rel=1e-10)


def test_negative_weights_rejected():
    with pytest.raises(ValueError):
        SphericalAtomMeasure(np.eye(2), np.array([1.0, -1.0]))


def test_log_minkowski_examples():
    K = fx.cube(3)
    assert abs(log_minkowski_gap(K, K)) <= 1e-10
    assert abs(log_minkowski_gap(K, scale(K, 2.0))) <= 1e-10


def test_log_minkowski_cube_cross_by_direct_summation():
    K = fx.cube(3)
    L = fx.with_volume(fx.cross_polytope(3), 8.0)
    # independent recomputation: facets of the cube are +-e_i, h_K = 1, area 4
    r = (8 / (4 / 3)) ** (1 / 3)  # cross-polytope scale factor
    hL = r  # support of r*conv{+-e_i} in direction e_i
    direct = sum((1 * 4 / 3) * math.log(hL / 1) for _ in range(6)) - 8 / 3 * math.log(1.0)
    assert log_minkowski_gap(K, L) == pytest.approx(direct, rel=1e-12)
    assert log_minkowski_gap(K, L) > 0


@given(st.floats(0.05, 20))
def test_dilation_neutrality(c):
    for K in (fx.cube(3), fx.hexagon(), fx.cross_polytope(3)):
        assert abs(log_minkowski_gap(K, scale(K, c))) <= 1e-10 * max(1, volume(K))


def test_direct_sum_of_dilates_chain():
    K = direct_sum([fx.square(), fx.segment()])
    L = direct_sum([scale(fx.square(), 2.0), scale(fx.segment(), 3.0)])
    L = fx.with_volume(L, volume(K))
    # equal-volume direct sums of dilates share their cone-volume measure
    eq, _, diff = match_atoms(cone_volume_measure(K), cone_volume_measure(L))
    assert eq and diff <= 1e-9
    assert abs(log_minkowski_gap(K, L)) <= 1e-8
    assert abs(log_minkowski_gap(L, K)) <= 1e-8
    R = direct_sum([fx.segment(), fx.segment(), fx.segment()])
    eq, _, _ = match_atoms(cone_volume_measure(fx.cube(3)), cone_volume_measure(R))
    assert eq


def test_non_dilate_measures_differ():
    K = direct_sum([fx.cross_polytope(2), fx.segment()])
    L = fx.with_volume(direct_sum([fx.square(), fx.segment()]), volume(K))
    eq, _, diff = match_atoms(cone_volume_measure(K), cone_volume_measure(L))
    assert not eq and diff > 0.1


def test_remark_equal_volume_symmetric_pairs():
    K = fx.cube(3)
    for L in (fx.with_volume(fx.cross_polytope(3), 8.0), fx.with_volume(fx.box([1, 2, 0.5]), 8.0)):
        assert log_support_integral(K, L) >= log_support_integral(K, K) - 1e-12


def test_match_atoms_reports_discrepancy():
    A = SphericalAtomMeasure(np.eye(2), np.array([1.0, 2.0]))
    B = SphericalAtomMeasure(np.eye(2), np.array([1.0, 2.5]))
    eq, where, diff = match_atoms(A, B)
    assert not eq and np.allclose(where, [0, 1]) and diff == pytest.approx(0.5)


# --- Monte Carlo ------------------------------------------------------------

def test_gaussian_interval_erf():
    est = gaussian_measure(fx.segment(), N_MC)
    assert abs(est.estimate - math.erf(1 / math.sqrt(2))) <= 3 * est.stderr


def test_gaussian_disk_closed_form():
    for r in (0.5, 1.0, 2.0):
        est = gaussian_measure(Disk(r), N_MC)
        assert abs(est.estimate - (1 - math.exp(-r * r / 2))) <= 3 * est.stderr


def test_gaussian_huge_cube():
    est = gaussian_measure(fx.cube(3, 100.0), 10**5)
    assert est.estimate == 1.0


def test_gaussian_monotone_under_inclusion():
    small, big = fx.cross_polytope(3), fx.cube(3)
    a, b = gaussian_measure(small, N_MC), gaussian_measure(big, N_MC)
    assert a.estimate <= b.estimate + 3 * (a.stderr + b.stderr)


def test_gaussian_deterministic_and_shared():
    m1, c1 = gaussian_samples_stats([fx.cube(2), fx.hexagon()], 2, 2 * 10**5, 7)
    m2, c2 = gaussian_samples_stats([fx.cube(2), fx.hexagon()], 2, 2 * 10**5, 7)
    assert np.array_equal(m1, m2) and np.array_equal(c1, c2)


def test_radial_gaussian_profile_matches_gaussian():
    prof = RadialProfile(lambda t: t ** 2 / 2)
    r = radial_logconcave_measure(fx.cube(2), prof, N_MC)
    g = gaussian_measure(fx.cube(2), N_MC)
    scaled = r.estimate / (2 * math.pi)
    assert abs(scaled - g.estimate) <= 3 * (r.stderr / (2 * math.pi) + g.stderr)


def test_radial_flat_profile_is_volume():
    prof = RadialProfile(lambda t: np.zeros_like(t))
    est = radial_logconcave_measure(fx.hexagon(), prof, N_MC)
    assert abs(est.estimate - volume(fx.hexagon())) <= 3 * est.stderr


def test_radial_exponential_disk_by_quadrature():
    prof = RadialProfile(lambda t: t)
    est = radial_logconcave_measure(Disk(1.0), prof, N_MC)
    exact = 2 * math.pi * quad(lambda r: r * math.exp(-r), 0, 1)[0]
    assert abs(est.estimate - exact) <= 3 * est.stderr


def test_radial_profile_rejects_nonconvex():
    with pytest.raises(ValueError):
        RadialProfile(lambda t: np.sqrt(t))


# --- Prekopa-Leindler -------------------------------------------------------

def test_pl_equal_gaussians():
    x = np.linspace(-6, 6, 1201)
    f = np.exp(-x ** 2)
    rep = prekopa_leindler_check(f, f, f, 0.5, x[1] - x[0])
    assert rep.hypothesis_holds and rep.gap >= -rep.error_bound and not rep.flagged


def test_pl_indicators():
    x = np.linspace(-1, 3, 801)
    dx = x[1] - x[0]
    ind = lambda a, b: ((x >= a - 1e-12) & (x <= b + 1e-12)).astype(float)
    rep = prekopa_leindler_check(ind(0, 1), ind(0, 2), ind(0, 1.5), 0.5, dx)
    assert rep.hypothesis_holds and not rep.violation
    assert rep.integral_h == pytest.approx(1.5, abs=2 * dx)
    assert rep.integral_h >= math.sqrt(rep.integral_f * rep.integral_g)


def test_pl_negative_control():
    x = np.linspace(-1, 3, 801)
    ind = lambda a, b: ((x >= a - 1e-12) & (x <= b + 1e-12)).astype(float)
    rep = prekopa_leindler_check(ind(0, 1), ind(0, 2), ind(0, 1.0), 0.5, x[1] - x[0])
    assert rep.flagged and not rep.hypothesis_holds


def test_pl_rejects_bad_lambda():
    x = np.zeros(11)
    with pytest.raises(ValueError, match="refine"):
        prekopa_leindler_check(x, x, x, 1 / math.pi, 0.1)


@given(st.fractions(min_value=Fraction(1, 8), max_value=Fraction(7, 8), max_denominator=8))
def test_pl_log_concave_family_holds(lam):
    # h = sup-convolution is bounded below by the log-concave mixture of two Gaussians' means
    x = np.linspace(-4, 4, 321)
    a, b = 0.5, -0.7
    f, g = np.exp(-(x - a) ** 2), np.exp(-(x - b) ** 2)
    m = (1 - float(lam)) * a + float(lam) * b
    h = np.exp(-(x - m) ** 2)
    rep = prekopa_leindler_check(f, g, h, lam, x[1] - x[0])
    assert rep.hypothesis_holds and not rep.violation
