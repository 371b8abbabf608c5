"""Wulff shapes of ``h_K^{1-lam} h_L^lam``: L0 combinations with two-sided volume bounds.

Convention: ``(1-lam)·K +_0 lam·L = {x : <x,u> <= h_K(u)^{1-lam} h_L(u)^lam  for all u}``,
so ``lam = 0`` gives ``K`` and ``lam = 1`` gives ``L``.

Two routes produce the certified bracket ``inner·outer ⊆ W ⊆ outer``:

* polytopal K and L (default): the facet normals of ``K + L`` are added to the
  direction grid.  On each cone of the common normal fan the function
  ``h_K^{1-lam} h_L^lam`` is a weighted geometric mean of two positive linear
  forms, hence concave and 1-homogeneous; a concave 1-homogeneous function
  minus ``<x, .>`` that is nonnegative on the extreme rays of a pointed cone is
  nonnegative on the whole cone.  So the constraints at the fan rays already
  cut out ``W`` exactly and ``inner = 1``.
* otherwise a global Lipschitz certificate (see :func:`lipschitz_constant` and
  :func:`l0_combination`).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial import ConvexHull

from .geometry import (
    GeometryError,
    HPolytope,
    OriginOutsideError,
    QuadricBody,
    VPolytope,
    as_polytope,
    canonicalize,
    dedup_rows,
    facets,
    hrep_from_vrep,
    minkowski_sum,
    radial,
    support_many,
    volume,
)

ROUNDOFF = 1e-10  # log-scale allowance for floating-point noise in exact brackets


class GridTooCoarseError(GeometryError):
    def __init__(self, delta, required):
        self.delta, self.required = delta, required
        super().__init__(f"grid too coarse: mesh {delta:.4g}, need mesh below {required:.4g}")


# ---------------------------------------------------------------------------
# direction grids


@dataclass(frozen=True, eq=False)
class DirectionGrid:
    directions: np.ndarray
    delta: float  # covering radius (geodesic) of the direction set
    label: str
    group_tag: str | None = None

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def __len__(self):
        return len(self.directions)

    def transformed(self, Phi) -> "DirectionGrid":
        """Directions ``Phi^{-T} d`` (normalised): the grid matching ``Phi``-images of bodies."""
        D = self.directions @ np.linalg.inv(np.asarray(Phi, dtype=float))
        D /= np.linalg.norm(D, axis=1)[:, None]
        return DirectionGrid(D, covering_radius(D), f"{self.label}|transformed", self.group_tag)

    def with_directions(self, extra, tag: str) -> "DirectionGrid":
        D = dedup_rows(np.vstack([self.directions, extra]), 1e-12)
        return DirectionGrid(D, covering_radius(D), f"{self.label}+{tag}", self.group_tag)


def covering_radius(D: np.ndarray) -> float:
    """Largest geodesic distance from a point of the sphere to the nearest direction.

    For a hull facet ``<a, x> = b`` of the direction set, every direction in its
    spherical simplex is within angle ``arccos(b)`` of some vertex of that facet
    (barycentric argument), so the maximum over facets bounds the covering
    radius; it is attained at circumcentres of acute facets.
    """
    n = D.shape[1]
    if n == 1:
        return 0.0 if (D[:, 0] > 0).any() and (D[:, 0] < 0).any() else math.pi
    hull = ConvexHull(D)
    b = -hull.equations[:, -1]
    if b.min() <= 0:
        return math.pi
    return float(np.arccos(np.clip(b.min(), -1.0, 1.0)))


def icosahedral_directions(level: int) -> np.ndarray:
    """Vertices of the ``level``-times subdivided icosahedron: ``10 * 4**level + 2`` points."""
    phi = (1 + 5 ** 0.5) / 2
    V = []
    for a, b in itertools.product([-1.0, 1.0], repeat=2):
        V += [(0, a, b * phi), (a, b * phi, 0), (b * phi, 0, a)]
    V = np.array(V, dtype=float)
    V /= np.linalg.norm(V, axis=1)[:, None]
    faces = ConvexHull(V).simplices
    verts = [tuple(v) for v in V]
    index = {k: i for i, k in enumerate(verts)}
    pts = list(V)
    for _ in range(level):
        mid_cache = {}
        new_faces = []

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in mid_cache:
                m = pts[i] + pts[j]
                pts.append(m / np.linalg.norm(m))
                mid_cache[key] = len(pts) - 1
            return mid_cache[key]

        for i, j, k in faces:
            a, b, c = mid(i, j), mid(j, k), mid(k, i)
            new_faces += [(i, a, c), (a, j, b), (c, b, k), (a, b, c)]
        faces = new_faces
    del index
    return np.array(pts)


def _lattice_directions(n: int, k: int) -> np.ndarray:
    """Boundary nodes of the ``k``-per-axis grid on ``[-1,1]^n``, normalised."""
    t = np.linspace(-1.0, 1.0, k)
    P = np.array(list(itertools.product(t, repeat=n)))
    P = P[np.abs(P).max(axis=1) >= 1.0 - 1e-12]
    return P / np.linalg.norm(P, axis=1)[:, None]


def _orbit_closure(D: np.ndarray, group) -> np.ndarray:
    imgs = np.vstack([D @ g.T for g in group.elements])
    return dedup_rows(imgs, 1e-9)


def direction_grid(n: int, resolution: int, group=None) -> DirectionGrid:
    """Unit directions covering ``S^{n-1}``.

    ``resolution`` is the number of angles for ``n = 2``, the subdivision level
    for ``n = 3`` (icosahedral) and the per-axis node count for ``n = 4``
    (normalised cube-boundary lattice).  With ``group`` the orbit closure is taken.
    """
    if n == 1:
        D, label = np.array([[-1.0], [1.0]]), "segment"
    elif n == 2:
        if resolution < 8:
            raise ValueError("circle grids need at least 8 directions")
        t = 2 * np.pi * np.arange(resolution) / resolution
        D, label = np.column_stack([np.cos(t), np.sin(t)]), f"circle-{resolution}"
    elif n == 3:
        if resolution < 0:
            raise ValueError("icosahedral level must be >= 0")
        D, label = icosahedral_directions(resolution), f"icosahedral-{resolution}"
    elif n == 4:
        if resolution < 8:
            raise ValueError("lattice grids need at least 8 nodes per axis")
        D, label = _lattice_directions(4, resolution), f"lattice-{resolution}"
    else:
        raise ValueError("built-in direction grids exist for n <= 4")
    tag = None
    if group is not None:
        D = _orbit_closure(D, group)
        tag = f"order-{group.order}"
    return DirectionGrid(D, covering_radius(D), label, tag)


def default_grid_level(n: int) -> int:
    return {1: 0, 2: 720, 3: 5, 4: 12}[n]


def parse_grid_level(n: int, spec: str | int | None) -> DirectionGrid:
    """``"circle-720"``, ``"icosahedral-5"``, ``"lattice-12"`` or a bare number."""
    if spec is None:
        return direction_grid(n, default_grid_level(n))
    if isinstance(spec, int) or str(spec).lstrip("-").isdigit():
        return direction_grid(n, int(spec))
    family, _, num = str(spec).rpartition("-")
    expected = {2: "circle", 3: "icosahedral", 4: "lattice"}.get(n)
    if family != expected or not num.isdigit():
        raise ValueError(f"grid level {spec!r} does not fit dimension {n} (expected {expected}-<k>)")
    return direction_grid(n, int(num))


# ---------------------------------------------------------------------------
# L0 combination


def body_radii(body) -> tuple[float, float]:
    """(inradius, circumradius) about the origin."""
    P = as_polytope(body)
    if P is not None:
        r = float(P.hrep.offsets.min())
        return r, float(np.linalg.norm(P.vertices, axis=1).max())
    return float(body.inradius), float(body.circumradius)


def lipschitz_constant(rK, RK, rL, RL, lam) -> float:
    """Lipschitz constant of ``f = h_K^{1-lam} h_L^lam`` along chords of the unit ball.

    ``|grad h| <= R`` wherever a support function is differentiable, and
    ``grad f = f ((1-lam) grad h_K / h_K + lam grad h_L / h_L)``.  Because ``f``
    is 1-homogeneous the ratios ``h_L/h_K`` at a chord point equal those at its
    radial projection, where ``r <= h <= R``.  Hence
    ``|grad f| <= (1-lam) R_K (R_L/r_K)^lam + lam R_L (R_K/r_L)^(1-lam)``.
    """
    return (1 - lam) * RK * (RL / rK) ** lam + lam * RL * (RK / rL) ** (1 - lam)


@dataclass(eq=False)
class WulffApprox:
    """Outer polytope and certified inner shrink factor for a Wulff shape."""

    outer: HPolytope
    inner_factor: float
    lipschitz_bound: float
    exact: bool
    grid: DirectionGrid
    lam: float

    @cached_property
    def vertices(self) -> VPolytope:
        return self.outer.vrep

    @cached_property
    def irredundant(self) -> HPolytope:
        return hrep_from_vrep(self.vertices)

    @property
    def dim(self) -> int:
        return self.outer.dim

    def contains(self, X, tol: float = 1e-9, side: str = "outer"):
        if side == "outer":
            return self.irredundant.contains(X, tol)
        if side == "inner":
            X = np.asarray(X, dtype=float)
            if self.inner_factor <= 0:
                return np.zeros(len(np.atleast_2d(X)), dtype=bool)
            return self.irredundant.contains(X / self.inner_factor, tol)
        raise ValueError("side must be 'outer' or 'inner'")

    def side(self, which: str):
        """A membership-only view usable wherever a body is expected."""
        return _WulffSide(self, which)

    @property
    def log_width(self) -> float:
        """``log(upper/lower)`` of the volume bracket."""
        if self.inner_factor <= 0:
            return math.inf
        return -self.dim * math.log(self.inner_factor)


@dataclass(frozen=True, eq=False)
class _WulffSide:
    w: WulffApprox
    which: str

    @property
    def dim(self):
        return self.w.dim

    def contains(self, X, tol: float = 1e-9):
        return self.w.contains(X, tol, self.which)


def fan_directions(K, L) -> np.ndarray | None:
    """Facet normals of ``K + L`` (rays of the common normal fan), if both are polytopes."""
    P, Q = as_polytope(K), as_polytope(L)
    if P is None or Q is None:
        return None
    S = minkowski_sum(canonicalize(P), canonicalize(Q))
    return np.array([f.normal for f in facets(S)])


def combination_function(K, L, lam, D) -> np.ndarray:
    hK = support_many(K, D)
    hL = support_many(L, D)
    if hK.min() <= 0 or hL.min() <= 0:
        raise OriginOutsideError("origin must be interior to both bodies (h > 0)")
    return hK ** (1 - lam) * hL ** lam


def l0_combination(K, L, lam: float, grid: DirectionGrid, fan: bool = True) -> WulffApprox:
    """Outer approximation and certified inner factor of ``(1-lam)·K +_0 lam·L``.

    Lipschitz route (no fan rays): for ``x`` in the outer polytope ``P`` and a
    unit ``u`` whose nearest grid direction ``v`` has ``|u - v| <= delta``,
    ``<x,u> <= <x,v> + |x| delta <= f(u) + (L_f + R_P) delta``.  Hence
    ``s P ⊆ W`` for ``s = 1 - (L_f + R_P) delta / f_lo``, where ``R_P`` is the
    circumradius of ``P`` and ``f_lo`` a lower bound of ``f`` on the sphere.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    if K.dim != L.dim or K.dim != grid.dim:
        raise ValueError("dimension mismatch")
    exact = False
    if fan:
        extra = fan_directions(K, L)
        if extra is not None:
            grid = grid.with_directions(extra, "fan")
            exact = True
    D = grid.directions
    f = combination_function(K, L, lam, D)
    outer = HPolytope(D, f)
    rK, RK = body_radii(K)
    rL, RL = body_radii(L)
    Lf = lipschitz_constant(rK, RK, rL, RL, lam)
    if exact:
        return WulffApprox(outer, 1.0, Lf, True, grid, lam)
    RP = float(np.linalg.norm(outer.vrep.vertices, axis=1).max())
    f_lo = max(float(f.min()) - Lf * grid.delta, rK ** (1 - lam) * rL ** lam)
    inner = 1.0 - (Lf + RP) * grid.delta / f_lo
    if inner <= 0:
        raise GridTooCoarseError(grid.delta, f_lo / (Lf + RP))
    return WulffApprox(outer, inner, Lf, False, grid, lam)


def volume_bounds(w: WulffApprox) -> tuple[float, float]:
    upper = volume(w.vertices)
    return w.inner_factor ** w.dim * upper, upper


def bracket_log_eps(w: WulffApprox) -> float:
    """Log-scale uncertainty of the volume bracket, including a rounding floor."""
    return w.log_width + ROUNDOFF


# ---------------------------------------------------------------------------
# coordinatewise products


def _positive_boundary_points(body, level_dirs: np.ndarray) -> np.ndarray:
    pts = []
    P = as_polytope(body)
    if P is not None:
        pts.append(np.abs(canonicalize(P).vertices))
    for d in level_dirs:
        pts.append((radial(body, d) * d)[None, :])
    return dedup_rows(np.vstack(pts), 1e-12)


def _is_unconditional(body) -> bool:
    from .symmetry import coordinate_reflections, is_invariant

    return all(is_invariant(body, r.matrix) for r in coordinate_reflections(body.dim))


def coordinatewise_product_inner(K, L, lam: float, budget: int = 20_000, check: bool = True) -> VPolytope:
    """Inner approximation of ``{ |x|^{1-lam} |y|^lam : x in K, y in L }`` (coordinatewise).

    Positive-orthant boundary points of ``K`` and ``L`` are paired in all
    combinations (up to ``budget`` pairs), combined coordinatewise, reflected
    through every sign pattern, and hulled.
    """
    if check and not (_is_unconditional(K) and _is_unconditional(L)):
        raise ValueError("coordinatewise products need unconditional bodies")
    n = K.dim
    grid = direction_grid(n, {1: 0, 2: 64, 3: 2, 4: 8}[n]).directions
    pos = grid[np.all(grid >= -1e-12, axis=1)]
    X = _positive_boundary_points(K, pos)
    Y = _positive_boundary_points(L, pos)
    per = max(2, int(math.isqrt(budget)))
    if len(X) > per:
        X = X[np.linspace(0, len(X) - 1, per).round().astype(int)]
    if len(Y) > per:
        Y = Y[np.linspace(0, len(Y) - 1, per).round().astype(int)]
    Z = (X[:, None, :] ** (1 - lam) * Y[None, :, :] ** lam).reshape(-1, n)
    signs = np.array(list(itertools.product([1.0, -1.0], repeat=n)))
    Z = (signs[:, None, :] * Z[None, :, :]).reshape(-1, n)
    return canonicalize(VPolytope(Z))


# ---------------------------------------------------------------------------
# Alexandrov derivative and the lambda profile


def _richardson_weights(t_steps) -> np.ndarray:
    """Linear weights turning forward differences D(t_i) into the Richardson limit."""
    t = np.asarray(t_steps, dtype=float)
    k = len(t)
    table = [np.eye(k)]
    for level in range(1, k):
        prev = table[-1]
        rows = []
        for i in range(len(prev) - 1):
            r = (t[i] / t[i + level]) ** 1  # ratio between the two steps combined at this level
            fac = r ** level
            rows.append((fac * prev[i + 1] - prev[i]) / (fac - 1.0))
        table.append(np.array(rows))
    return table[-1][0], (table[-2][-1] if k > 1 else table[-1][0])


@dataclass
class AlexandrovReport:
    t_steps: list
    slopes: list
    extrapolated: float
    error: float
    I1: float  # ∫ h_K log(h_L/h_K) dS_K
    I2: float  # I1 / n
    matches_I1: bool
    matches_I2: bool
    notes: list = field(default_factory=list)


def alexandrov_derivative(K, L, t_steps=(1e-2, 5e-3, 2.5e-3), grid: DirectionGrid | None = None,
                          rel_tol: float = 1e-3) -> AlexandrovReport:
    """Right derivative at 0 of ``t -> V(W_t)`` for ``h_t = h_K^{1-t} h_L^t``, versus the
    surface-area integral with and without a ``1/n`` factor."""
    P = as_polytope(K)
    if P is None:
        raise TypeError("alexandrov_derivative needs a polytopal K (for its surface-area measure)")
    n = K.dim
    if grid is None:
        grid = direction_grid(n, {1: 0, 2: 360, 3: 3, 4: 8}[n])

    def mid(t):
        lo, up = volume_bounds(l0_combination(K, L, t, grid))
        return 0.5 * (lo + up), up - lo

    m0, w0 = mid(0.0)
    slopes, widths = [], []
    for t in t_steps:
        m, w = mid(t)
        slopes.append((m - m0) / t)
        widths.append((w + w0) / t)
    weights, prev_weights = _richardson_weights(t_steps)
    extrap = float(weights @ slopes)
    prev = float(prev_weights @ slopes)
    err = abs(extrap - prev) + float(np.abs(weights) @ widths)
    fs = facets(P)
    U = np.array([f.normal for f in fs])
    hK = np.array([f.offset for f in fs])
    hL = support_many(L, U)
    if hK.min() <= 0 or hL.min() <= 0:
        raise OriginOutsideError("nonpositive support values")
    I1 = float(np.sum(hK * np.log(hL / hK) * np.array([f.area for f in fs])))
    I2 = I1 / n
    floor = 1e-9 * volume(P)

    def close(target):
        return abs(extrap - target) <= max(err, rel_tol * abs(target), floor)

    rep = AlexandrovReport(list(t_steps), slopes, extrap, err, I1, I2, close(I1), close(I2))
    if rep.matches_I1 and not rep.matches_I2:
        rep.notes.append("derivative matches the surface-area integral without the 1/n factor")
    elif rep.matches_I2 and not rep.matches_I1:
        rep.notes.append("derivative matches the surface-area integral with the 1/n factor")
    elif rep.matches_I1 and rep.matches_I2:
        rep.notes.append("both candidates agree (integral is zero)")
    else:
        rep.notes.append("neither candidate matched within tolerance")
    return rep


@dataclass(frozen=True)
class ProfilePoint:
    lam: float
    lower: float
    upper: float
    eps: float  # log-scale bracket uncertainty

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)


def lambda_profile(K, L, lams, grid: DirectionGrid, fan: bool = True) -> list[ProfilePoint]:
    out = []
    for lam in lams:
        w = l0_combination(K, L, float(lam), grid, fan=fan)
        lo, up = volume_bounds(w)
        out.append(ProfilePoint(float(lam), lo, up, bracket_log_eps(w)))
    return out


@dataclass(frozen=True)
class ConcavityRow:
    lam: float
    lhs: float  # log m(lam_i)
    rhs: float  # average of the neighbours' logs
    eps: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def ok(self) -> bool:
        return self.margin >= -self.eps


def log_concavity_rows(profile: list[ProfilePoint]) -> list[ConcavityRow]:
    """Midpoint log-concavity at interior nodes of a uniformly spaced profile."""
    lams = np.array([p.lam for p in profile])
    if len(lams) >= 3 and np.ptp(np.diff(lams)) > 1e-12:
        raise ValueError("log-concavity check needs uniformly spaced lambda values")
    logs = [math.log(p.mid) for p in profile]
    rows = []
    for i in range(1, len(profile) - 1):
        eps = profile[i].eps + 0.5 * (profile[i - 1].eps + profile[i + 1].eps)
        rows.append(ConcavityRow(profile[i].lam, logs[i], 0.5 * (logs[i - 1] + logs[i + 1]), eps))
    return rows
