import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from logbm import fixtures as fx
from logbm.geometry import OriginOutsideError, VPolytope, direct_sum, scale, support_many, transform, volume
from logbm.l0 import (
    GridTooCoarseError,
    alexandrov_derivative,
    bracket_log_eps,
    combination_function,
    coordinatewise_product_inner,
    covering_radius,
    direction_grid,
    l0_combination,
    lambda_profile,
    lipschitz_constant,
    log_concavity_rows,
    parse_grid_level,
    body_radii,
    volume_bounds,
)
from logbm.symmetry import coordinate_reflections, generate_group

CROSS8 = fx.with_volume(fx.cross_polytope(3), 8.0)


def sphere_sample(n, k, seed):
    X = np.random.default_rng(seed).normal(size=(k, n))
    return X / np.linalg.norm(X, axis=1)[:, None]


# --- grids --------------------------------------------------------------------

def test_circle_grid():
    g = direction_grid(2, 360)
    assert len(g) == 360
    assert g.delta == pytest.approx(np.pi / 360)
    assert g.delta <= 2 * np.pi / 360 * 1.2


def test_icosahedral_counts():
    for k in range(5):
        assert len(direction_grid(3, k)) == 10 * 4 ** k + 2
    assert len(direction_grid(3, 4)) == 2562


def test_icosahedral_nested():
    a, b = direction_grid(3, 2).directions, direction_grid(3, 3).directions
    assert all(np.abs(b - x).max(axis=1).min() < 1e-12 for x in a)


@pytest.mark.parametrize("n,res", [(2, 36), (3, 2), (3, 3), (4, 8)])
def test_covering_radius_is_certified(n, res):
    g = direction_grid(n, res)
    Y = sphere_sample(n, 20000, 3)
    ang = np.arccos(np.clip(Y @ g.directions.T, -1, 1)).min(axis=1)
    assert ang.max() <= g.delta + 1e-12


def test_group_tagged_grid_is_closed():
    G = generate_group(coordinate_reflections(3))
    g = direction_grid(3, 2, group=G)
    for S in G.elements:
        img = g.directions @ S.T
        assert all(np.abs(g.directions - x).max(axis=1).min() < 1e-9 for x in img)
    assert g.group_tag == "order-8"


def test_grid_errors():
    with pytest.raises(ValueError):
        direction_grid(2, 4)
    with pytest.raises(ValueError):
        direction_grid(5, 10)
    with pytest.raises(ValueError):
        parse_grid_level(3, "circle-720")
    assert parse_grid_level(3, "icosahedral-2").label == "icosahedral-2"
    assert parse_grid_level(2, None).label == "circle-720"


def test_covering_radius_one_dim():
    assert covering_radius(np.array([[1.0], [-1.0]])) == 0.0


# --- Lipschitz constant ---------------------------------------------------------

@pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 0.9, 1.0])
@pytest.mark.parametrize("pair", [(fx.cube(3), CROSS8), (fx.box([1, 2, 0.5]), fx.cross_polytope(3)),
                                  (fx.cube(3), fx.cylinders(3))])
def test_lipschitz_bound_dominates_finite_differences(lam, pair):
    K, L = pair
    rK, RK = body_radii(K)
    rL, RL = body_radii(L)
    Lf = lipschitz_constant(rK, RK, rL, RL, lam)
    U = sphere_sample(3, 300, 7)
    V = U + 1e-3 * sphere_sample(3, 300, 8)
    V /= np.linalg.norm(V, axis=1)[:, None]
    fU = combination_function(K, L, lam, U)
    fV = combination_function(K, L, lam, V)
    ratio = np.abs(fU - fV) / np.linalg.norm(U - V, axis=1)
    assert ratio.max() <= Lf * (1 + 1e-6)


# --- L0 combination -----------------------------------------------------------

def test_l0_same_body_is_body():
    K = fx.cube(3)
    w = l0_combination(K, K, 0.3, direction_grid(3, 2))
    assert w.exact and w.inner_factor == 1.0
    assert volume_bounds(w) == pytest.approx((8.0, 8.0), rel=1e-12)
    w = l0_combination(K, K, 0.3, direction_grid(3, 4), fan=False)
    lo, up = volume_bounds(w)
    assert lo <= 8.0 <= up
    X = np.random.default_rng(1).uniform(-1.5, 1.5, size=(2000, 3))
    inner = w.contains(X, side="inner")
    assert np.all(K.hrep.contains(X[inner]))
    assert np.all(w.contains(X[K.hrep.contains(X)]))


@pytest.mark.parametrize("c", [0.5, 2.0, 3.0])
@pytest.mark.parametrize("lam", [0.0, 0.25, 0.5, 1.0])
def test_l0_dilation_bracket(c, lam):
    K = fx.cube(3)
    target = c ** (3 * lam) * 8.0
    for fan, level in ((True, 2), (False, 4)):
        lo, up = volume_bounds(l0_combination(K, scale(K, c), lam, direction_grid(3, level), fan=fan))
        assert lo * (1 - 1e-12) <= target <= up * (1 + 1e-12)


def test_l0_square_cross_against_finer_grid():
    K, L = fx.square(), fx.cross_polytope(2)
    coarse = l0_combination(K, L, 0.5, direction_grid(2, 72), fan=False)
    fine = l0_combination(K, L, 0.5, direction_grid(2, 720), fan=False)
    lo_c, up_c = volume_bounds(coarse)
    lo_f, up_f = volume_bounds(fine)
    slack = 1 + 1e-12
    assert lo_c <= lo_f * slack and lo_f <= up_f * slack and up_f <= up_c * slack
    exact = volume_bounds(l0_combination(K, L, 0.5, direction_grid(2, 8)))
    assert exact[0] == exact[1]
    assert lo_f <= exact[0] <= up_f
    assert up_f == pytest.approx(exact[0], rel=1e-12)  # the 720-grid contains the fan rays


def test_fan_route_matches_dense_random_directions():
    K, L = fx.cube(3), CROSS8
    w = l0_combination(K, L, 0.5, direction_grid(3, 1))
    extra = sphere_sample(3, 50000, 11)
    f = combination_function(K, L, 0.5, extra)
    V = w.vertices.vertices
    assert np.max(V @ extra.T - f[None, :]) <= 1e-12  # no extra direction cuts the polytope


@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_bracket_membership_spot_checks(lam):
    K, L = fx.cube(3), CROSS8
    coarse, fine = direction_grid(3, 3), direction_grid(3, 4)  # nested: fine contains coarse
    w = l0_combination(K, L, lam, coarse, fan=False)
    fD = fine.directions
    ff = combination_function(K, L, lam, fD)
    X = np.random.default_rng(5).uniform(-2.2, 2.2, size=(1000, 3))

    def fine_member(P):
        return np.all(P @ fD.T <= ff[None, :] + 1e-12, axis=1)

    inner = w.contains(X, side="inner")
    assert np.all(fine_member(X[inner]))
    out = ~w.contains(X)
    assert not np.any(fine_member(X[out]))


def test_grid_monotonicity():
    K, L = fx.cube(3), CROSS8
    prev = (0.0, math.inf)
    for level in range(2, 5):
        lo, up = volume_bounds(l0_combination(K, L, 0.5, direction_grid(3, level), fan=False))
        assert lo * (1 + 1e-12) >= prev[0] and up <= prev[1] * (1 + 1e-12)
        prev = (lo, up)


def test_linear_invariance():
    K, L = fx.box([1, 2, 0.5]), CROSS8
    A = np.array([[1.0, 0.3, 0.1], [0.0, 1.2, -0.2], [0.1, 0.0, 0.9]])
    g = direction_grid(3, 4)
    for fan in (True, False):
        w = l0_combination(K, L, 0.4, g, fan=fan)
        wA = l0_combination(transform(K, A), transform(L, A), 0.4, g.transformed(A), fan=fan)
        # halfspace-by-halfspace correspondence of the grid constraints
        D = g.directions
        DA = g.transformed(A).directions
        fA = combination_function(transform(K, A), transform(L, A), 0.4, DA)
        f = combination_function(K, L, 0.4, D)
        scale_ = np.linalg.norm(D @ np.linalg.inv(A), axis=1)
        assert np.allclose(fA, f / scale_, rtol=1e-12)
        assert volume_bounds(wA)[1] == pytest.approx(abs(np.linalg.det(A)) * volume_bounds(w)[1], rel=1e-9)
        if fan:
            assert volume_bounds(wA)[0] == pytest.approx(abs(np.linalg.det(A)) * volume_bounds(w)[0], rel=1e-9)


def test_grid_too_coarse():
    with pytest.raises(GridTooCoarseError) as e:
        l0_combination(fx.cube(3), CROSS8, 0.5, direction_grid(3, 0), fan=False)
    assert 0 < e.value.required < e.value.delta


def test_l0_errors():
    with pytest.raises(ValueError):
        l0_combination(fx.cube(3), fx.cube(3), 1.5, direction_grid(3, 1))
    with pytest.raises(OriginOutsideError):
        l0_combination(fx.simplex(3), fx.cube(3), 0.5, direction_grid(3, 1))


@pytest.mark.parametrize("c1,c2", [(2.0, 3.0), (0.5, 1.5), (1.0, 4.0)])
@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_equality_fixture_direct_sum_of_dilates(c1, c2, lam):
    K = direct_sum([fx.square(), fx.segment()])
    L = direct_sum([scale(fx.square(), c1), scale(fx.segment(), c2)])
    w = l0_combination(K, L, lam, direction_grid(3, 3))
    lo, up = volume_bounds(w)
    target = (1 - lam) * math.log(volume(K)) + lam * math.log(volume(L))
    assert abs(math.log(0.5 * (lo + up)) - target) <= bracket_log_eps(w)


def test_oracle_body_uses_lipschitz_route():
    K = fx.cylinders(3)
    w = l0_combination(K, K, 0.5, direction_grid(3, 3))
    assert not w.exact and 0 < w.inner_factor < 1


# --- coordinatewise products --------------------------------------------------

def test_coordinatewise_same_body():
    K = fx.cross_polytope(3)
    P = coordinatewise_product_inner(K, K, 0.5)
    assert volume(P) <= volume(K) * (1 + 1e-12)
    assert np.all(K.hrep.contains(P.vertices, 1e-9))


@given(st.lists(st.floats(0.2, 3), min_size=3, max_size=3), st.lists(st.floats(0.2, 3), min_size=3, max_size=3),
       st.sampled_from([0.25, 0.5, 0.75]))
def test_coordinatewise_boxes_exact(a, b, lam):
    a, b = np.array(a), np.array(b)
    P = coordinatewise_product_inner(fx.box(a), fx.box(b), lam)
    assert volume(P) == pytest.approx(volume(fx.box(a ** (1 - lam) * b ** lam)), rel=1e-10)


UNCONDITIONAL_PAIRS = [
    (fx.cube(3), CROSS8),
    (fx.box([1, 2, 0.5]), fx.cross_polytope(3)),
    (fx.hexagon(), fx.square()),
    (fx.random_unconditional(3, 5, np.random.default_rng(2)), fx.random_unconditional(3, 5, np.random.default_rng(3))),
    (fx.cube(3), fx.cylinders(3)),
]


@pytest.mark.parametrize("K,L", UNCONDITIONAL_PAIRS)
@pytest.mark.parametrize("lam", [0.25, 0.5, 0.75])
def test_sandwich_inclusion(K, L, lam):
    P = coordinatewise_product_inner(K, L, lam, budget=4000)
    w = l0_combination(K, L, lam, direction_grid(K.dim, 180 if K.dim == 2 else 3))
    assert np.all(w.contains(P.vertices, 1e-9))


def test_coordinatewise_requires_unconditional():
    with pytest.raises(ValueError):
        coordinatewise_product_inner(fx.regular_polygon(3), fx.square(), 0.5)


# --- Alexandrov derivative -------------------------------------------------------

def test_alexandrov_same_body():
    r = alexandrov_derivative(fx.cube(3), fx.cube(3))
    assert abs(r.extrapolated) <= 1e-8 and r.I1 == 0 and r.I2 == 0
    assert r.matches_I1 and r.matches_I2


def test_alexandrov_dilation_resolves_factor():
    K = fx.cube(3)
    r = alexandrov_derivative(K, scale(K, 2.0))
    assert r.I1 == pytest.approx(24 * math.log(2), rel=1e-12)
    assert r.I2 == pytest.approx(8 * math.log(2), rel=1e-12)
    assert abs(r.extrapolated - r.I1) <= 1e-3 * r.I1
    assert r.matches_I1 and not r.matches_I2


def test_alexandrov_cube_cross_nonnegative():
    r = alexandrov_derivative(fx.cube(3), CROSS8)
    assert r.extrapolated >= 0
    assert r.matches_I1


# --- lambda profile -----------------------------------------------------------

LAMS = np.linspace(0, 1, 11)


def test_profile_dilation_log_linear():
    K = fx.cube(3)
    prof = lambda_profile(K, scale(K, 2.0), LAMS, direction_grid(3, 2))
    for p in prof:
        assert math.log(p.mid) == pytest.approx(math.log(8) + 3 * p.lam * math.log(2), abs=1e-10)


def test_profile_constant_for_equal_bodies():
    prof = lambda_profile(fx.hexagon(), fx.hexagon(), LAMS, direction_grid(2, 36))
    assert np.ptp([p.mid for p in prof]) <= 1e-12


@pytest.mark.parametrize("fan", [True, False])
def test_profile_log_concave_cube_cross(fan):
    prof = lambda_profile(fx.cube(3), CROSS8, LAMS, direction_grid(3, 4), fan=fan)
    rows = log_concavity_rows(prof)
    assert len(rows) == 9 and all(r.ok for r in rows)


def test_profile_requires_uniform_lambdas():
    prof = lambda_profile(fx.square(), fx.square(), [0, 0.1, 0.5], direction_grid(2, 36))
    with pytest.raises(ValueError):
        log_concavity_rows(prof)
