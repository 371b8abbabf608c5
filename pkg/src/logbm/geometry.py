"""Low-dimensional polytope and oracle-body geometry.

Bodies come in three flavours that share a small duck-typed surface
(``dim``, ``support(U)``, ``contains(X)``):

* :class:`VPolytope` -- convex hull of a vertex list,
* :class:`HPolytope` -- bounded intersection of halfspaces ``<u, x> <= h``,
* :class:`OracleBody` / :class:`QuadricBody` -- support and membership oracles.

Hull and halfspace-intersection work is delegated to qhull through
``scipy.spatial``; the brute-force enumerators at the bottom of the module are
independent cross-checks for small inputs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.sparse.csgraph import connected_components
from scipy.sparse import coo_matrix
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError, cKDTree

TOL = 1e-9
MAX_ENUM_DIM = 4


class GeometryError(ValueError):
    pass


class UnboundedError(GeometryError):
    def __init__(self, direction):
        self.direction = np.asarray(direction, dtype=float)
        super().__init__(f"unbounded in direction {np.round(self.direction, 6).tolist()}")


class LowerDimensionalError(GeometryError):
    def __init__(self, dim, what="body"):
        self.dim = dim
        super().__init__(f"lower-dimensional {what}: affine hull dimension {dim}")


class OriginOutsideError(GeometryError):
    def __init__(self, msg="origin outside the interior of the body"):
        super().__init__(msg)


# ---------------------------------------------------------------------------
# small helpers


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if not np.isfinite(nrm) or nrm == 0.0:
        raise ValueError("zero or non-finite direction")
    return v / nrm


def cluster_rows(X: np.ndarray, tol: float) -> np.ndarray:
    """Label rows of ``X`` so rows within ``tol`` (Euclidean) share a label.

    Labels are numbered in order of first appearance, which keeps downstream
    output independent of the kd-tree's internal ordering.
    """
    X = np.asarray(X, dtype=float)
    m = len(X)
    if m == 0:
        return np.zeros(0, dtype=int)
    pairs = cKDTree(X).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return np.arange(m)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, raw = connected_components(graph, directed=False)
    first = {}
    labels = np.empty(m, dtype=int)
    for i, r in enumerate(raw):
        labels[i] = first.setdefault(r, len(first))
    return labels


def dedup_rows(X: np.ndarray, tol: float) -> np.ndarray:
    """Merge rows within ``tol``; returns representatives in lexicographic order."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        return X
    labels = cluster_rows(X, tol)
    reps = np.array([X[labels == k].mean(axis=0) for k in range(labels.max() + 1)])
    return lexsort_rows(reps)


def lexsort_rows(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        return X
    order = np.lexsort(X.T[::-1])
    return X[order]


def affine_dim(points: np.ndarray, tol: float = TOL) -> int:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if len(points) <= 1:
        return 0
    diffs = points[1:] - points[0]
    s = np.linalg.svd(diffs, compute_uv=False)
    scale = max(1.0, float(np.abs(points).max()))
    return int(np.sum(s > tol * scale))


def _check_enum_dim(n):
    if n > MAX_ENUM_DIM:
        raise ValueError(f"exact enumeration is limited to n <= {MAX_ENUM_DIM} (got n = {n})")


def _simplex_measure(P: np.ndarray) -> float:
    """k-dimensional volume of the simplex with k+1 vertices given as rows."""
    G = P[1:] - P[0]
    k = len(G)
    if k == 0:
        return 1.0
    # QR instead of the Gram determinant, which squares the conditioning of slivers
    R = np.linalg.qr(G.T, mode="r")
    return float(abs(np.prod(np.diag(R)))) / math.factorial(k)


# ---------------------------------------------------------------------------
# body types


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex hull of finitely many points (rows of ``vertices``)."""

    vertices: np.ndarray

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if V.size == 0:
            raise ValueError("VPolytope needs at least one vertex")
        if not np.all(np.isfinite(V)):
            raise ValueError("non-finite vertex coordinates")
        V = V.copy()
        V.setflags(write=False)
        object.__setattr__(self, "vertices", V)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def support(self, U) -> np.ndarray | float:
        U = np.asarray(U, dtype=float)
        return (U @ self.vertices.T).max(axis=-1)

    @cached_property
    def hrep(self) -> "HPolytope":
        return hrep_from_vrep(self)

    @cached_property
    def canonical(self) -> "VPolytope":
        return canonicalize(self)

    def contains(self, X, tol: float = TOL) -> np.ndarray:
        return self.hrep.contains(X, tol)

    @cached_property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())

    @cached_property
    def inradius(self) -> float:
        """Radius of the largest origin-centred ball inside (0 if origin not interior)."""
        return max(0.0, float(self.hrep.offsets.min()))

    def __repr__(self):
        return f"VPolytope(n={self.dim}, m={len(self.vertices)})"


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Bounded polytope ``{x : <u_j, x> <= h_j}`` with unit normals ``u_j``."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        U = np.atleast_2d(np.asarray(self.normals, dtype=float))
        h = np.asarray(self.offsets, dtype=float).reshape(-1)
        if len(U) != len(h):
            raise ValueError("normals and offsets differ in length")
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(h))):
            raise ValueError("non-finite halfspace data")
        if np.any(np.abs(np.linalg.norm(U, axis=1) - 1.0) > 1e-12):
            raise ValueError("halfspace normals must be unit vectors (use HPolytope.from_inequalities)")
        rows = np.hstack([U, h[:, None]])
        if len(rows) > 1:
            labels = cluster_rows(rows, 1e-12)
            if labels.max() + 1 < len(rows):
                _, keep = np.unique(labels, return_index=True)
                keep.sort()
                U, h = U[keep], h[keep]
        U, h = U.copy(), h.copy()
        U.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "normals", U)
        object.__setattr__(self, "offsets", h)
        _check_bounded(U)

    @classmethod
    def from_inequalities(cls, A, b) -> "HPolytope":
        """Build from ``A x <= b`` with arbitrary (nonzero) rows."""
        A = np.atleast_2d(np.asarray(A, dtype=float))
        b = np.asarray(b, dtype=float).reshape(-1)
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise ValueError("zero row in inequality system")
        return cls(A / nrm[:, None], b / nrm)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @cached_property
    def vrep(self) -> VPolytope:
        return vrep_from_hrep(self)

    def support(self, U):
        return self.vrep.support(U)

    def contains(self, X, tol: float = TOL) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        out = np.empty(len(X), dtype=bool)
        for start in range(0, len(X), 65536):
            blk = X[start:start + 65536]
            out[start:start + 65536] = np.all(blk @ self.normals.T <= self.offsets + tol, axis=1)
        return out[0] if single else out

    def __repr__(self):
        return f"HPolytope(n={self.dim}, m={len(self.offsets)})"


@dataclass(frozen=True, eq=False)
class OracleBody:
    """A convex body known only through support and membership oracles.

    ``support_fn`` maps a direction (n,) to a float; ``contains_fn`` maps an
    (k, n) array to a boolean (k,) array.  ``inradius``/``circumradius`` are
    radii of origin-centred balls inside/containing the body.
    """

    dim: int
    support_fn: Callable[[np.ndarray], float]
    contains_fn: Callable[[np.ndarray], np.ndarray]
    inradius: float
    circumradius: float
    name: str = "oracle"
    support_tol: float = 1e-8

    def support(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return float(self.support_fn(U))
        return np.array([self.support_fn(u) for u in U])

    def contains(self, X, tol: float = TOL):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return bool(self.contains_fn(X[None, :])[0])
        return np.asarray(self.contains_fn(X), dtype=bool)


@dataclass(frozen=True, eq=False)
class QuadricBody:
    """Intersection of cylinders ``sum_{i in I_k} x_i^2 <= rho_k^2``.

    ``constraints`` holds (0-based index tuple, rho) pairs; the index sets must
    cover every coordinate so the body is bounded.
    """

    dim: int
    constraints: tuple

    def __post_init__(self):
        cons = []
        covered = set()
        for idx, rho in self.constraints:
            idx = tuple(sorted(int(i) for i in idx))
            if not idx or min(idx) < 0 or max(idx) >= self.dim:
                raise ValueError(f"constraint index set {idx} out of range for n = {self.dim}")
            if not rho > 0:
                raise ValueError("constraint radius must be positive")
            cons.append((idx, float(rho)))
            covered.update(idx)
        if covered != set(range(self.dim)):
            raise UnboundedError(np.eye(self.dim)[min(set(range(self.dim)) - covered)])
        object.__setattr__(self, "constraints", tuple(cons))

    @classmethod
    def from_one_based(cls, dim, constraints) -> "QuadricBody":
        return cls(dim, tuple((tuple(i - 1 for i in idx), rho) for idx, rho in constraints))

    @cached_property
    def _masks(self) -> np.ndarray:
        M = np.zeros((len(self.constraints), self.dim))
        for k, (idx, _) in enumerate(self.constraints):
            M[k, list(idx)] = 1.0
        return M

    @cached_property
    def _rho(self) -> np.ndarray:
        return np.array([r for _, r in self.constraints])

    @property
    def inradius(self) -> float:
        return float(self._rho.min())

    @property
    def circumradius(self) -> float:
        return float(np.sqrt(np.sum(self._rho ** 2)))

    support_tol = 1e-8

    def constraint_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X ** 2) @ self._masks.T

    def contains(self, X, tol: float = TOL):
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        ok = np.all(self.constraint_values(X) <= self._rho ** 2 + tol, axis=1)
        return bool(ok[0]) if single else ok

    def radial(self, d) -> float:
        d = np.asarray(d, dtype=float)
        vals = np.sqrt(self.constraint_values(d)[0])
        with np.errstate(divide="ignore"):
            return float(np.min(np.where(vals > 0, self._rho / vals, np.inf)))

    def support(self, U):
        U = np.asarray(U, dtype=float)
        if U.ndim == 1:
            return self._support_one(U)[0]
        return np.array([self._support_one(u)[0] for u in U])

    def _support_one(self, u, max_starts: int = 200, agree: float = 1e-8):
        """Support value via the Lagrangian dual in the constraint multipliers.

        For multipliers ``mu >= 0`` the dual function is
        ``g(mu) = sum_i u_i^2 / (4 s_i) + sum_k mu_k rho_k^2`` with
        ``s_i = sum_{k : i in I_k} mu_k``; every ``g(mu)`` is an upper bound on
        ``h(u)``.  The maximiser of the Lagrangian, rescaled onto the body, is
        feasible and gives a lower bound.  Starts are tried until two runs agree
        within ``agree`` and the primal/dual gap is below it as well.
        Returns (value, gap).
        """
        u = np.asarray(u, dtype=float)
        if not np.any(u):
            raise ValueError("zero direction")
        M, rho2 = self._masks, self._rho ** 2
        u2 = u ** 2
        need = u2 > 0

        def g(theta):
            mu = np.exp(theta)
            s = M.T @ mu
            val = np.sum(u2[need] / (4 * s[need])) + mu @ rho2
            gs = np.zeros_like(s)
            gs[need] = -u2[need] / (4 * s[need] ** 2)
            return val, (M @ gs + rho2) * mu

        m = len(rho2)
        starts = [np.zeros(m)] + [np.full(m, -2.0)]
        starts += [np.log(np.abs(c) + 0.05) for c in _sphere_points(m, max_starts - 2)]
        results = []
        for th0 in starts[:max_starts]:
            res = minimize(g, th0, jac=True, method="BFGS", options={"gtol": 1e-13, "maxiter": 3000})
            mu = np.exp(res.x)
            s = M.T @ mu
            x = np.zeros_like(u)
            x[need] = u[need] / (2 * s[need])
            vals = np.sqrt(self.constraint_values(x)[0])
            t = np.min(np.where(vals > 0, self._rho / np.where(vals > 0, vals, 1.0), np.inf))
            lower, upper = float(u @ (t * x)), float(res.fun)
            results.append((upper - lower, lower, upper))
            results.sort()
            if len(results) >= 2:
                (gap0, lo0, up0), (gap1, lo1, up1) = results[0], results[1]
                scale = max(1.0, abs(up0))
                if gap0 <= agree * scale and abs(up0 - up1) <= agree * scale:
                    return 0.5 * (lo0 + up0), gap0
        gap, lo, up = results[0]
        if gap > agree * max(1.0, abs(up)):
            raise GeometryError(f"quadric support did not converge (gap {gap:.3g})")
        return 0.5 * (lo + up), gap


def _sphere_points(dim, count):
    """Deterministic quasi-uniform points on S^{dim-1} (spiral / lattice)."""
    if dim == 1:
        return [np.array([1.0]) if i % 2 == 0 else np.array([-1.0]) for i in range(count)]
    rng = np.random.Generator(np.random.Philox(2024))
    P = rng.normal(size=(count, dim))
    return list(P / np.linalg.norm(P, axis=1)[:, None])


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    """Centred ellipsoid ``{x : x^T M x <= 1}``."""

    matrix: np.ndarray
    gap: float = 0.0

    def __post_init__(self):
        M = np.asarray(self.matrix, dtype=float)
        if np.abs(M - M.T).max() > 1e-12 * max(1.0, np.abs(M).max()):
            raise ValueError("ellipsoid matrix must be symmetric")
        M = 0.5 * (M + M.T)
        if np.linalg.eigvalsh(M).min() <= 0:
            raise ValueError("ellipsoid matrix must be positive definite")
        M.setflags(write=False)
        object.__setattr__(self, "matrix", M)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.einsum("ij,jk,ik->i", X, self.matrix, X)

    def contains(self, X, tol: float = TOL):
        return self.values(X) <= 1.0 + tol

    def volume(self) -> float:
        n = self.dim
        unit_ball = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
        return unit_ball / math.sqrt(np.linalg.det(self.matrix))

    def whitening(self) -> np.ndarray:
        """Symmetric square root of ``M``: maps the ellipsoid onto the unit ball."""
        w, Q = np.linalg.eigh(self.matrix)
        return (Q * np.sqrt(w)) @ Q.T


Body = VPolytope | HPolytope | OracleBody | QuadricBody


# ---------------------------------------------------------------------------
# operations


def support(body, u) -> float:
    """Support function ``h(u) = max <u, x>`` over the body."""
    u = np.asarray(u, dtype=float)
    if u.shape != (body.dim,):
        raise ValueError(f"direction must have shape ({body.dim},)")
    if not np.any(u):
        raise ValueError("zero direction")
    return float(body.support(u))


def support_many(body, U) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=float))
    return np.asarray(body.support(U), dtype=float)


def radial(body, d) -> float:
    """Radial function: largest t with t*d in the body (origin must be interior)."""
    d = np.asarray(d, dtype=float)
    if isinstance(body, QuadricBody):
        return body.radial(d)
    if isinstance(body, (VPolytope, HPolytope)):
        H = body.hrep if isinstance(body, VPolytope) else body
        if H.offsets.min() <= 0:
            raise OriginOutsideError()
        a = H.normals @ d
        pos = a > 0
        return float(np.min(H.offsets[pos] / a[pos]))
    lo, hi = 0.0, body.circumradius / np.linalg.norm(d) * (1 + 1e-9)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if body.contains(mid * d):
            lo = mid
        else:
            hi = mid
    return lo


def _check_bounded(U: np.ndarray):
    """Raise :class:`UnboundedError` unless the normals positively span R^n."""
    n = U.shape[1]
    if n == 1:
        if not (np.any(U[:, 0] > 0) and np.any(U[:, 0] < 0)):
            raise UnboundedError([1.0] if not np.any(U[:, 0] > 0) else [-1.0])
        return
    r = np.linalg.matrix_rank(U, tol=1e-10)
    if r < n:
        _, _, vt = np.linalg.svd(U)
        raise UnboundedError(vt[-1])
    try:
        hull = ConvexHull(U)
    except QhullError:
        _, _, vt = np.linalg.svd(U - U.mean(axis=0))
        d = vt[-1]
        raise UnboundedError(d if np.all(U @ d <= 1e-12) else -d) from None
    worst = int(np.argmax(hull.equations[:, -1]))
    if hull.equations[worst, -1] >= -1e-12:
        raise UnboundedError(hull.equations[worst, :-1])


def _interior_point(U, h, tol):
    """Chebyshev centre of ``{U x <= h}``; returns (point, radius)."""
    if h.min() > tol:
        return np.zeros(U.shape[1]), float(h.min())
    n = U.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([U, np.ones((len(U), 1))])
    res = linprog(c, A_ub=A, b_ub=h, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        raise LowerDimensionalError(-1, "halfspace system (infeasible)")
    return res.x[:n], float(res.x[-1])


def vrep_from_hrep(H: HPolytope, tol: float = TOL) -> VPolytope:
    """Vertex set of a bounded, full-dimensional H-polytope."""
    U, h = H.normals, H.offsets
    n = H.dim
    _check_enum_dim(n)
    scale = max(float(np.abs(h).max()), 1e-300)
    hs = h / scale
    if n == 1:
        upper = hs[U[:, 0] > 0].min()
        lower = -hs[U[:, 0] < 0].min()
        if upper - lower <= tol:
            raise LowerDimensionalError(0 if upper - lower >= -tol else -1)
        return VPolytope(np.array([[lower], [upper]]) * scale)
    x0, r = _interior_point(U, hs, tol)
    if r <= tol:
        raise LowerDimensionalError(_hrep_affine_dim(U, hs, tol), "halfspace system")
    hsi = HalfspaceIntersection(np.hstack([U, -hs[:, None]]), x0)
    P = hsi.intersections
    P = P[np.all(P @ U.T <= hs + tol, axis=1)]
    P = dedup_rows(P, tol)
    return VPolytope(P * scale)


def _hrep_affine_dim(U, h, tol):
    m, n = U.shape
    if math.comb(m, n) > 200_000:
        return None
    pts = vrep_bruteforce(U, h, tol)
    if len(pts) == 0:
        return -1
    return affine_dim(pts, 1e-7)


def hrep_from_vrep(V: VPolytope, tol: float = TOL) -> HPolytope:
    """Irredundant facet description of a full-dimensional V-polytope."""
    n = V.dim
    _check_enum_dim(n)
    P = V.vertices
    scale = max(float(np.abs(P).max()), 1e-300)
    Ps = P / scale
    d = affine_dim(Ps, tol)
    if d < n:
        raise LowerDimensionalError(d)
    if n == 1:
        return HPolytope(np.array([[1.0], [-1.0]]), np.array([P.max(), -P.min()]))
    hull = ConvexHull(Ps)
    eq = hull.equations
    normals, offsets = eq[:, :-1], -eq[:, -1]
    labels = cluster_rows(np.hstack([normals, offsets[:, None]]), tol)
    U = np.array([unit(normals[labels == k].mean(axis=0)) for k in range(labels.max() + 1)])
    hh = np.array([offsets[labels == k].mean() for k in range(labels.max() + 1)])
    order = np.lexsort(np.hstack([U, hh[:, None]]).T[::-1])
    return HPolytope(U[order], hh[order] * scale)


def canonicalize(V: VPolytope, tol: float = TOL) -> VPolytope:
    """Drop non-extreme and duplicate points; lexicographic vertex order."""
    P = V.vertices
    n = V.dim
    scale = max(float(np.abs(P).max()), 1e-300)
    if n == 1:
        return VPolytope(np.unique(np.array([P.min(), P.max()]))[:, None])
    if affine_dim(P / scale, tol) < n:
        return VPolytope(dedup_rows(P, tol * scale))
    hull = ConvexHull(P / scale)
    return VPolytope(dedup_rows(P[hull.vertices], tol * scale))


class Facet(NamedTuple):
    normal: np.ndarray
    offset: float
    area: float


class VolumeResult(NamedTuple):
    value: float
    degenerate: bool


@dataclass(frozen=True)
class _HullData:
    volume: float
    facets: tuple


def _hull_data(V: VPolytope, tol: float = TOL) -> _HullData:
    cached = V.__dict__.get("_hull_cache")
    if cached is not None:
        return cached
    n = V.dim
    _check_enum_dim(n)
    P = V.vertices
    scale = max(float(np.abs(P).max()), 1e-300)
    d = affine_dim(P / scale, tol)
    if d < n:
        raise LowerDimensionalError(d)
    if n == 1:
        lo, hi = float(P.min()), float(P.max())
        data = _HullData(hi - lo, (Facet(np.array([-1.0]), -lo, 1.0), Facet(np.array([1.0]), hi, 1.0)))
    else:
        hull = ConvexHull(P / scale)
        eq = hull.equations
        labels = cluster_rows(eq, tol)
        pts = hull.points * scale
        centroid = pts[hull.vertices].mean(axis=0)
        fact = math.factorial(n)
        vol = 0.0
        areas = np.zeros(labels.max() + 1)
        for simplex, lab in zip(hull.simplices, labels):
            S = pts[simplex]
            vol += abs(np.linalg.det(S - centroid)) / fact
            areas[lab] += _simplex_measure(S)
        facets = []
        for k in range(labels.max() + 1):
            u = unit(eq[labels == k, :-1].mean(axis=0))
            h = float(-eq[labels == k, -1].mean() * scale)
            facets.append(Facet(u, h, float(areas[k])))
        facets.sort(key=lambda f: tuple(f.normal))
        data = _HullData(vol, tuple(facets))
    V.__dict__["_hull_cache"] = data
    return data


def volume_info(V: VPolytope) -> VolumeResult:
    try:
        return VolumeResult(_hull_data(V).volume, False)
    except LowerDimensionalError:
        return VolumeResult(0.0, True)


def volume(body) -> float:
    """Lebesgue volume of a polytope (0.0 for degenerate input)."""
    if isinstance(body, HPolytope):
        body = body.vrep
    if not isinstance(body, VPolytope):
        raise TypeError("volume() needs a polytope")
    return volume_info(body).value


def facets(V) -> list[Facet]:
    """Facets as (unit outer normal, support value, (n-1)-dim area)."""
    if isinstance(V, HPolytope):
        V = V.vrep
    return list(_hull_data(V).facets)


def boundary_normal(body: QuadricBody, x, tol: float = 1e-8):
    """Outer unit normal at a boundary point, or the string ``"non-smooth"``."""
    vals = body.constraint_values(x)[0]
    rho2 = body._rho ** 2
    excess = vals - rho2
    if excess.max() > tol or excess.max() < -tol:
        raise ValueError("point is not on the boundary")
    active = np.flatnonzero(np.abs(excess) <= tol)
    if len(active) >= 2:
        return "non-smooth"
    g = np.asarray(x, dtype=float) * body._masks[active[0]]
    return unit(g)


def transform(body, A):
    """Image ``A(body)`` under an invertible linear map."""
    A = np.asarray(A, dtype=float)
    if isinstance(body, VPolytope):
        return VPolytope(body.vertices @ A.T)
    Ainv = np.linalg.inv(A)
    if isinstance(body, HPolytope):
        return HPolytope.from_inequalities(body.normals @ Ainv, body.offsets)
    s = np.linalg.svd(A, compute_uv=False)
    return OracleBody(
        dim=body.dim,
        support_fn=lambda u: body.support(A.T @ u),
        contains_fn=lambda X: body.contains(np.atleast_2d(X) @ Ainv.T),
        inradius=body.inradius * s.min(),
        circumradius=body.circumradius * s.max(),
        name=f"transform({getattr(body, 'name', type(body).__name__)})",
    )


def scale(body, c: float):
    return transform(body, c * np.eye(body.dim))


def direct_sum(bodies: Sequence) -> VPolytope | OracleBody:
    """Sum of bodies placed in complementary coordinate blocks (a product set)."""
    dims = [b.dim for b in bodies]
    if all(isinstance(b, (VPolytope, HPolytope)) for b in bodies):
        blocks = [b.vrep.vertices if isinstance(b, HPolytope) else b.vertices for b in bodies]
        rows = [np.concatenate(combo) for combo in itertools.product(*blocks)]
        return VPolytope(np.array(rows))
    cuts = np.cumsum([0] + dims)

    def sup(u):
        return sum(float(b.support(u[cuts[i]:cuts[i + 1]])) for i, b in enumerate(bodies))

    def cont(X):
        X = np.atleast_2d(X)
        ok = np.ones(len(X), dtype=bool)
        for i, b in enumerate(bodies):
            ok &= np.asarray(b.contains(X[:, cuts[i]:cuts[i + 1]]), dtype=bool)
        return ok

    return OracleBody(
        dim=int(cuts[-1]),
        support_fn=sup,
        contains_fn=cont,
        inradius=min(b.inradius for b in bodies),
        circumradius=math.sqrt(sum(b.circumradius ** 2 for b in bodies)),
        name="direct-sum",
    )


def minkowski_sum(A: VPolytope, B: VPolytope) -> VPolytope:
    if A.dim != B.dim:
        raise ValueError("dimension mismatch in Minkowski sum")
    S = (A.vertices[:, None, :] + B.vertices[None, :, :]).reshape(-1, A.dim)
    return canonicalize(VPolytope(S))


def as_polytope(body) -> VPolytope | None:
    if isinstance(body, VPolytope):
        return body
    if isinstance(body, HPolytope):
        return body.vrep
    return None


# ---------------------------------------------------------------------------
# Loewner ellipsoid


def centered_mvee(points, tol: float = 1e-6, max_iter: int = 200_000) -> Ellipsoid:
    """Minimum-volume origin-centred ellipsoid containing ``points``.

    Khachiyan's barycentric ascent on the dual weights with Todd-Yildirim away
    steps; stops once ``max_i p_i^T X(w)^{-1} p_i <= n (1 + tol)``.  The result
    is rescaled so the farthest point lies exactly on the boundary.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    m, n = P.shape
    if np.linalg.matrix_rank(P, tol=1e-10 * max(1.0, np.abs(P).max())) < n:
        raise LowerDimensionalError(int(np.linalg.matrix_rank(P, tol=1e-10)), "point set")
    w = np.full(m, 1.0 / m)
    for _ in range(max_iter):
        X = (P * w[:, None]).T @ P
        kappa = np.einsum("ij,ij->i", P @ np.linalg.inv(X), P)
        j = int(np.argmax(kappa))
        supp = np.flatnonzero(w > 0)
        i = supp[int(np.argmin(kappa[supp]))]
        gap = kappa[j] / n - 1.0
        if gap <= tol:
            break
        if kappa[j] - n >= n - kappa[i]:
            beta = (kappa[j] - n) / (n * (kappa[j] - 1.0))
            w *= 1.0 - beta
            w[j] += beta
        else:
            drop = -w[i] / (1.0 - w[i])
            # kappa_i <= 1 (e.g. the origin) never supports the optimum: drop it
            beta = drop if kappa[i] <= 1.0 else max((kappa[i] - n) / (n * (kappa[i] - 1.0)), drop)
            w *= 1.0 - beta
            w[i] += beta
            w[w < 0] = 0.0
    X = (P * w[:, None]).T @ P
    Minv = np.linalg.inv(X)
    kappa = np.einsum("ij,ij->i", P @ Minv, P)
    M = Minv / kappa.max()
    return Ellipsoid(0.5 * (M + M.T), gap=float(kappa.max() / n - 1.0))


def loewner_ellipsoid(V: VPolytope, tol: float = 1e-6) -> Ellipsoid:
    """Löwner (minimum-volume enclosing) ellipsoid of an origin-symmetric polytope."""
    P = V.vertices
    scale = max(1.0, float(np.abs(P).max()))
    tree = cKDTree(P)
    dist, _ = tree.query(-P)
    if dist.max() > 1e-9 * scale:
        raise GeometryError("vertex set is not origin-symmetric; symmetrize (use {±v}) first")
    return centered_mvee(P, tol)


def loewner_probe(E: Ellipsoid, points, factor: float = 1e-5) -> bool:
    """Local optimality probe: shrinking along the top eigendirection drops a point."""
    w, Q = np.linalg.eigh(E.matrix)
    q = Q[:, -1]
    M2 = E.matrix + factor * w[-1] * np.outer(q, q)
    P = np.atleast_2d(points)
    return bool(np.any(np.einsum("ij,jk,ik->i", P, M2, P) > 1.0))


# ---------------------------------------------------------------------------
# brute-force enumerators (independent cross-checks)


def vrep_bruteforce(U, h, tol: float = TOL) -> np.ndarray:
    """Solve every n-subset of halfspaces; keep feasible, merge duplicates."""
    U = np.asarray(U, dtype=float)
    h = np.asarray(h, dtype=float)
    n = U.shape[1]
    pts = []
    for idx in itertools.combinations(range(len(U)), n):
        A = U[list(idx)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        x = np.linalg.solve(A, h[list(idx)])
        if np.all(U @ x <= h + tol):
            pts.append(x)
    if not pts:
        return np.zeros((0, n))
    return dedup_rows(np.array(pts), tol)


def hrep_bruteforce(P, tol: float = TOL) -> tuple[np.ndarray, np.ndarray]:
    """Every n-subset of points spanning a supporting hyperplane gives a facet."""
    P = np.asarray(P, dtype=float)
    m, n = P.shape
    rows = []
    for idx in itertools.combinations(range(m), n):
        Q = P[list(idx)]
        G = Q[1:] - Q[0]
        if n == 1:
            a = np.array([1.0])
        else:
            _, s, vt = np.linalg.svd(G)
            if len(s) < n - 1 or s[-1] < 1e-10:
                continue
            a = vt[-1]
        b = a @ Q[0]
        vals = P @ a - b
        if np.all(vals <= tol):
            rows.append(np.append(a, b))
        elif np.all(vals >= -tol):
            rows.append(np.append(-a, -b))
    R = dedup_rows(np.array(rows), tol)
    return R[:, :-1], R[:, -1]
