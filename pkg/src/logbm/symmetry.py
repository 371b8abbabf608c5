"""Linear reflections, finite reflection groups, chambers and unconditionalization.

A chamber of a finite reflection group is built directly from its mirror
arrangement: pick a generic point, keep the sign of every mirror functional,
and read off the bounding walls.  For a finite group acting with trivial
fixed space the chamber is a simplicial cone ``pos{u_1, ..., u_n}`` and the
group images tile space.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    TOL,
    GeometryError,
    HPolytope,
    VPolytope,
    OracleBody,
    QuadricBody,
    canonicalize,
    centered_mvee,
    hrep_from_vrep,
    transform,
    unit,
    volume,
    vrep_from_hrep,
)

MATRIX_TOL = 1e-8
ORTHO_TOL = 1e-7
DEFAULT_CAP = 100_000
CHAMBER_SEED = 0x5EED


class GroupTooLargeError(GeometryError):
    pass


class NonReflectionArrangementError(GeometryError):
    pass


class PreconditionError(GeometryError):
    pass


class ToleranceError(GeometryError):
    def __init__(self, what, deviation, tol):
        self.deviation = deviation
        super().__init__(f"{what}: deviation {deviation:.3e} exceeds tolerance {tol:.1e}")


@dataclass(frozen=True, eq=False)
class LinearReflection:
    """``A x = x - 2 <x, nvec>/<u, nvec> u``: fixes ``nvec^⊥``, flips ``u``."""

    matrix: np.ndarray
    nvec: np.ndarray
    u: np.ndarray

    @property
    def is_orthogonal(self) -> bool:
        A = self.matrix
        return bool(np.abs(A.T @ A - np.eye(len(A))).max() <= ORTHO_TOL)


def linear_reflection(nvec, u) -> LinearReflection:
    nvec, u = unit(nvec), unit(u)
    c = float(u @ nvec)
    if abs(c) < 1e-10:
        raise ValueError("flipped vector lies in the mirror (<u, nvec> = 0)")
    n = len(nvec)
    A = np.eye(n) - 2.0 * np.outer(u, nvec) / c
    _check_reflection(A, nvec)
    return LinearReflection(A, nvec, u)


def orthogonal_reflection(nvec) -> LinearReflection:
    return linear_reflection(nvec, nvec)


def _check_reflection(A, nvec):
    n = len(A)
    I = np.eye(n)
    if np.abs(A @ A - I).max() > 1e-10:
        raise ValueError("reflection is not an involution")
    if abs(np.linalg.det(A) + 1.0) > 1e-10:
        raise ValueError("reflection determinant is not -1")
    _, _, vt = np.linalg.svd(nvec[None, :])
    H = vt[1:]
    if len(H) and np.abs(H @ A.T - H).max() > 1e-10:
        raise ValueError("reflection does not fix its mirror")


def as_reflection(A, tol: float = MATRIX_TOL) -> LinearReflection | None:
    """Recognise a matrix as a linear reflection (else ``None``)."""
    A = np.asarray(A, dtype=float)
    n = len(A)
    I = np.eye(n)
    if np.abs(A @ A - I).max() > tol or abs(np.linalg.det(A) + 1.0) > tol:
        return None
    D = A - I
    _, s, vt = np.linalg.svd(D)
    if s[0] < tol or (n > 1 and s[1] > tol):
        return None
    nvec = vt[0]
    u = unit(D @ nvec)
    # D = -2 u nvec^T / <u, nvec>, so D nvec is parallel to u
    return LinearReflection(A, nvec, u)


# ---------------------------------------------------------------------------


def _signed_permutation(A, tol: float = 1e-12):
    """``j -> i`` with ``A e_j = +-e_i``, or ``None`` when ``A`` is not a signed permutation."""
    B = np.abs(A)
    if np.any((B > tol) & (np.abs(B - 1) > tol)):
        return None
    big = B > 0.5
    if not (np.all(big.sum(axis=0) == 1) and np.all(big.sum(axis=1) == 1)):
        return None
    return {int(j): int(np.argmax(big[:, j])) for j in range(len(A))}


def is_invariant(body, A, tol: float = 1e-8, n_dirs: int = 1000) -> bool:
    """Whether ``A(body) = body``."""
    A = np.asarray(A, dtype=float)
    if isinstance(body, HPolytope):
        body = body.vrep
    if isinstance(body, VPolytope):
        P = canonicalize(body).vertices
        Q = P @ A.T
        if len(P) != len(Q):
            return False
        from scipy.spatial import cKDTree

        d, _ = cKDTree(P).query(Q)
        scale = max(1.0, float(np.abs(P).max()))
        return bool(d.max() <= tol * scale)
    if isinstance(body, QuadricBody):
        perm = _signed_permutation(A)
        if perm is not None:
            # constraints only see x_i^2, so signed permutations act on the index sets
            mapped = sorted((tuple(sorted(perm[i] for i in I)), r) for I, r in body.constraints)
            return mapped == sorted((tuple(sorted(I)), r) for I, r in body.constraints)
    rng = np.random.Generator(np.random.Philox(0xD1))
    U = rng.normal(size=(n_dirs, body.dim))
    U /= np.linalg.norm(U, axis=1)[:, None]
    h1 = np.array([body.support(A.T @ u) for u in U])
    h0 = np.array([body.support(u) for u in U])
    tol_eff = max(tol, getattr(body, "support_tol", 0.0) * 2)
    return bool(np.abs(h1 - h0).max() <= tol_eff * max(1.0, np.abs(h0).max()))


@dataclass(frozen=True, eq=False)
class ReflectionGroup:
    elements: tuple
    generators: tuple

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return len(self.elements[0])

    def reflections(self) -> list[LinearReflection]:
        out = []
        for g in self.elements:
            r = as_reflection(g)
            if r is not None:
                out.append(r)
        return out


def _key(A):
    return tuple(np.round(A, 7).ravel() + 0.0)


def generate_group(generators, cap: int = DEFAULT_CAP) -> ReflectionGroup:
    """Breadth-first closure of the generators under left multiplication."""
    gens = [g.matrix if isinstance(g, LinearReflection) else np.asarray(g, dtype=float) for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    n = len(gens[0])
    identity = np.eye(n)
    buckets: dict = {_key(identity): [identity]}
    elements = [identity]
    queue = deque([identity])
    while queue:
        g = queue.popleft()
        for s in gens:
            h = s @ g
            bucket = buckets.setdefault(_key(h), [])
            if any(np.abs(h - e).max() < MATRIX_TOL for e in bucket):
                continue
            bucket.append(h)
            elements.append(h)
            if len(elements) > cap:
                raise GroupTooLargeError(f"group too large or infinite (more than {cap} elements)")
            queue.append(h)
    refl = tuple(g if isinstance(g, LinearReflection) else as_reflection(g) for g in generators)
    return ReflectionGroup(tuple(elements), refl)


@dataclass(frozen=True, eq=False)
class Subspace:
    basis: np.ndarray  # rows, orthonormal

    @property
    def dim(self) -> int:
        return len(self.basis)


def fix_space(G: ReflectionGroup, tol: float = 1e-8) -> Subspace:
    n = G.dim
    D = np.vstack([g - np.eye(n) for g in G.elements])
    _, s, vt = np.linalg.svd(D)
    rank = int(np.sum(s > tol))
    return Subspace(vt[rank:].copy())


# ---------------------------------------------------------------------------
# chambers


@dataclass(frozen=True, eq=False)
class ChamberCone:
    """Simplicial cone ``pos{u_i} = {x : <x_i, x> <= 0 for all i}``.

    ``generators[i]`` is the ray *off* wall ``i``; ``normals[i]`` is the unit
    outer normal of wall ``i``, so ``<x_i, u_j> = 0`` for ``i != j`` and
    ``<x_i, u_i> < 0``.
    """

    generators: np.ndarray
    normals: np.ndarray

    def __post_init__(self):
        U, X = np.asarray(self.generators, float), np.asarray(self.normals, float)
        n = U.shape[1]
        if U.shape != (n, n) or X.shape != (n, n):
            raise ValueError("a simplicial cone in R^n has n generators and n walls")
        if np.linalg.matrix_rank(U, tol=1e-10) < n:
            raise ValueError("cone generators are linearly dependent")
        Gm = X @ U.T
        off = Gm - np.diag(np.diag(Gm))
        if np.abs(off).max() > 1e-9 or np.any(np.diag(Gm) >= 0):
            raise ValueError("wall normals do not match generators")
        object.__setattr__(self, "generators", U)
        object.__setattr__(self, "normals", X)

    @classmethod
    def from_generators(cls, U) -> "ChamberCone":
        U = np.asarray(U, dtype=float)
        X = -np.linalg.inv(U).T
        return cls(U, X / np.linalg.norm(X, axis=1)[:, None])

    @property
    def dim(self) -> int:
        return self.generators.shape[1]

    def contains(self, Y, tol: float = TOL) -> np.ndarray:
        Y = np.atleast_2d(Y)
        return np.all(Y @ self.normals.T <= tol, axis=1)

    def contains_interior(self, Y, tol: float = TOL) -> np.ndarray:
        Y = np.atleast_2d(Y)
        return np.all(Y @ self.normals.T < -tol, axis=1)

    def wall_reflections(self) -> list[LinearReflection]:
        return [orthogonal_reflection(x) for x in self.normals]


def mirror_normals(G: ReflectionGroup) -> np.ndarray:
    """Unit normals of all mirror hyperplanes of reflections in ``G`` (one per mirror)."""
    ms = []
    for r in G.reflections():
        m = r.nvec if r.nvec[np.flatnonzero(np.abs(r.nvec) > 1e-9)[0]] > 0 else -r.nvec
        if not any(np.abs(m - q).max() < 1e-8 for q in ms):
            ms.append(m)
    return np.array(ms)


def chamber_cone(G: ReflectionGroup, seed: int = CHAMBER_SEED) -> ChamberCone:
    n = G.dim
    if fix_space(G).dim != 0:
        raise PreconditionError("Fix(G) is not {0}; chambers are not pointed cones")
    M = mirror_normals(G)
    if len(M) == 0:
        raise NonReflectionArrangementError("group contains no reflections")
    rng = np.random.Generator(np.random.Philox(seed))
    while True:
        # positive coordinates bias the choice towards the positive orthant
        p = np.abs(rng.normal(size=n))
        p /= np.linalg.norm(p)
        if np.abs(M @ p).min() >= 1e-6:
            break
    A = M * np.sign(M @ p)[:, None]  # chamber = {x : <a, x> >= 0}
    if n == 1:
        return ChamberCone(np.sign(p)[None, :], -A[:1])
    rays = []
    for idx in itertools.combinations(range(len(A)), n - 1):
        S = A[list(idx)]
        _, s, vt = np.linalg.svd(S)
        if s[-1] < 1e-9:
            continue
        r = vt[-1]
        for cand in (r, -r):
            if np.all(A @ cand >= -1e-9):
                if not any(np.abs(cand - q).max() < 1e-8 for q in rays):
                    rays.append(cand)
    rays = np.array(rays)
    walls = []
    for a in A:
        on = rays[np.abs(rays @ a) <= 1e-9]
        if len(on) and np.linalg.matrix_rank(on, tol=1e-9) == n - 1:
            walls.append(a)
    if len(rays) != n or len(walls) != n:
        raise NonReflectionArrangementError(
            f"chamber is not simplicial ({len(rays)} rays, {len(walls)} walls)"
        )
    walls = np.array(walls)
    order = sorted(range(n), key=lambda i: (int(np.argmax(np.abs(rays[i]))), tuple(-np.abs(rays[i]))))
    rays = rays[order] + 0.0  # drop negative zeros
    normals = []
    for r in rays:
        off = [w for w in walls if abs(w @ r) > 1e-9]
        if len(off) != 1:
            raise NonReflectionArrangementError("ray/wall incidence is not simplicial")
        normals.append(-off[0])
    return ChamberCone(rays, np.array(normals))


def tiling_reps(G: ReflectionGroup, C: ChamberCone, n_samples: int = 10_000, seed: int = 7) -> list:
    """Group elements giving pairwise distinct chamber images that tile R^n."""
    reps, seen = [], []
    for g in G.elements:
        img = lexsort_unit(C.generators @ g.T)
        if any(np.abs(img - s).max() < 1e-8 for s in seen):
            continue
        seen.append(img)
        reps.append(g)
    n = G.dim
    rng = np.random.Generator(np.random.Philox(seed))
    Y = rng.normal(size=(n_samples, n))
    Y /= np.linalg.norm(Y, axis=1)[:, None]
    covered = np.zeros(n_samples, dtype=bool)
    for g in reps:
        covered |= C.contains(Y @ np.linalg.inv(g).T)
    if not covered.all():
        raise GeometryError(f"chamber images miss {int((~covered).sum())} of {n_samples} sample directions")
    # disjoint interiors: interior points of one image avoid the interiors of the others
    alpha = rng.uniform(0.05, 1.0, size=(64, n))
    inner = alpha @ C.generators
    for i, g in enumerate(reps):
        pts = inner @ g.T
        for j, h in enumerate(reps):
            if i != j and C.contains_interior(pts @ np.linalg.inv(h).T, 1e-9).any():
                raise GeometryError("chamber images overlap")
    return reps


def lexsort_unit(R):
    R = R / np.linalg.norm(R, axis=1)[:, None]
    return R[np.lexsort(np.round(R, 9).T[::-1])]


def cone_map_phi(C: ChamberCone) -> np.ndarray:
    """``Phi`` with ``Phi u_i = e_i`` (so ``Phi(C)`` is the positive orthant)."""
    return np.linalg.inv(C.generators.T)


def positivity_check(C: ChamberCone) -> bool:
    G = C.generators @ C.generators.T
    return bool(G.min() >= -1e-10)


# ---------------------------------------------------------------------------
# unconditionalization


def sign_maps(n: int) -> list[np.ndarray]:
    return [np.diag(s) for s in itertools.product([1.0, -1.0], repeat=n)]


def cone_slice(K, C: ChamberCone) -> VPolytope:
    """``K ∩ C`` for a polytope ``K`` containing the origin."""
    H = K if isinstance(K, HPolytope) else hrep_from_vrep(K)
    n = H.dim
    Hc = HPolytope(np.vstack([H.normals, C.normals]), np.concatenate([H.offsets, np.zeros(n)]))
    return vrep_from_hrep(Hc)


@dataclass
class UnconditionalResult:
    body: VPolytope
    piece: VPolytope  # Phi(K ∩ C) in the positive orthant
    slice: VPolytope  # K ∩ C
    hull_excess: float  # relative volume excess of the hull over the union


def unconditionalize(K, C: ChamberCone, Phi, check: bool = True) -> UnconditionalResult:
    """Map ``K ∩ C`` to the positive orthant and reflect through all sign patterns.

    The union of the reflected pieces is convex for valid inputs; the convex
    hull is taken and compared against the union's volume (must agree to 1e-9).
    """
    if isinstance(K, HPolytope):
        K = K.vrep
    if not isinstance(K, VPolytope):
        raise TypeError("unconditionalize needs a polytope")
    if check:
        for r in C.wall_reflections():
            if not is_invariant(K, r.matrix):
                raise PreconditionError("body is not invariant under the chamber's wall reflections")
        if not positivity_check(C):
            raise PreconditionError("chamber generators are not pairwise non-obtuse")
    Phi = np.asarray(Phi, dtype=float)
    sl = cone_slice(K, C)
    piece = VPolytope(sl.vertices @ Phi.T)
    n = K.dim
    pts = np.vstack([piece.vertices @ S for S in sign_maps(n)])
    body = canonicalize(VPolytope(pts))
    union = 2 ** n * volume(piece)
    excess = (volume(body) - union) / union
    if abs(excess) > 1e-9:
        raise GeometryError(f"reflected pieces are not convex (hull excess {excess:.3e})")
    return UnconditionalResult(body, piece, sl, excess)


@dataclass
class NormalConeReport:
    checked: int
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def normal_cone_check(K, C: ChamberCone, samples: int = 200, seed: int = 11) -> NormalConeReport:
    """Facets meeting the open chamber must have their outer normal inside the chamber."""
    if isinstance(K, HPolytope):
        K = K.vrep
    from .geometry import facets

    V = canonicalize(K).vertices
    rng = np.random.Generator(np.random.Philox(seed))
    scale = max(1.0, float(np.abs(V).max()))
    rep = NormalConeReport(0)
    for f in facets(K):
        on = V[np.abs(V @ f.normal - f.offset) <= 1e-9 * scale]
        w = rng.dirichlet(np.ones(len(on)), size=samples)
        pts = w @ on
        if not C.contains_interior(pts, 1e-12).any():
            continue
        rep.checked += 1
        if np.any(C.normals @ f.normal > 1e-9):
            rep.violations.append(f.normal)
    return rep


# ---------------------------------------------------------------------------
# orthogonalization through the Loewner ellipsoid


@dataclass
class Orthogonalized:
    phi: np.ndarray
    body: VPolytope
    reflections: list
    deviation: float


def orthogonalize(K, refs, tol: float = 1e-6) -> Orthogonalized:
    """Conjugate linear reflections to orthogonal ones via the Loewner ellipsoid.

    The ellipsoid matrix is averaged over the generated group, which keeps it
    feasible and optimal (log det is concave) and makes it exactly invariant,
    so the conjugated maps are orthogonal up to rounding.
    """
    if isinstance(K, HPolytope):
        K = K.vrep
    for r in refs:
        if not is_invariant(K, r.matrix):
            raise PreconditionError("body is not invariant under a supplied reflection")
    G = generate_group(refs)
    if fix_space(G).dim != 0:
        raise PreconditionError("mirrors do not intersect in {0}")
    P = canonicalize(K).vertices
    E = centered_mvee(np.vstack([P, -P]), tol)
    M = sum(g.T @ E.matrix @ g for g in G.elements) / G.order
    M = 0.5 * (M + M.T)
    M /= np.einsum("ij,jk,ik->i", P, M, P).max()
    w, Q = np.linalg.eigh(M)
    phi = (Q * np.sqrt(w)) @ Q.T
    phinv = np.linalg.inv(phi)
    out, dev = [], 0.0
    for r in refs:
        B = phi @ r.matrix @ phinv
        dev = max(dev, float(np.abs(B.T @ B - np.eye(len(B))).max()))
        rr = as_reflection(B)
        if rr is None:
            raise GeometryError("conjugated map is not a reflection")
        out.append(orthogonal_reflection(rr.nvec) if dev <= ORTHO_TOL else rr)
    if dev > ORTHO_TOL:
        raise ToleranceError("conjugated reflections are not orthogonal", dev, ORTHO_TOL)
    return Orthogonalized(phi, VPolytope(P @ phi.T), out, dev)


# ---------------------------------------------------------------------------
# named generator sets


def coordinate_reflections(n: int) -> list[LinearReflection]:
    return [orthogonal_reflection(e) for e in np.eye(n)]


def dihedral_reflections(m: int, n: int = 2) -> list[LinearReflection]:
    """Mirrors at angle ``pi/m`` in the first coordinate plane (order ``2m`` in R^2);
    in higher dimension the remaining coordinates get sign reflections."""
    a = np.zeros(n)
    a[1] = 1.0
    b = np.zeros(n)
    b[0], b[1] = -np.sin(np.pi / m), np.cos(np.pi / m)
    refs = [orthogonal_reflection(a), orthogonal_reflection(b)]
    refs += [orthogonal_reflection(e) for e in np.eye(n)[2:]]
    return refs


def hyperoctahedral_reflections(n: int) -> list[LinearReflection]:
    """Simple reflections of type B_n: ``e_i - e_{i+1}`` and ``e_n``."""
    E = np.eye(n)
    refs = [orthogonal_reflection(E[i] - E[i + 1]) for i in range(n - 1)]
    refs.append(orthogonal_reflection(E[n - 1]))
    return refs


def named_reflections(name: str, n: int) -> list[LinearReflection]:
    """``sign``, ``dihedral-<m>``, ``b<n>`` / ``hyperoctahedral``."""
    if name in ("sign", "coordinate", "unconditional"):
        return coordinate_reflections(n)
    if name.startswith("dihedral-"):
        return dihedral_reflections(int(name.split("-", 1)[1]), n)
    if name in ("hyperoctahedral", f"b{n}", "bn"):
        return hyperoctahedral_reflections(n)
    raise KeyError(f"unknown reflection set {name!r}")
