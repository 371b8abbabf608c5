"""Verification commands.  Each returns a :class:`Report`; the CLI renders it."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import specfmt
from .geometry import (
    GeometryError,
    QuadricBody,
    VPolytope,
    as_polytope,
    boundary_normal,
    canonicalize,
    direct_sum,
    facets,
    minkowski_sum,
    radial,
    scale,
    volume,
)
from .l0 import (
    DirectionGrid,
    GridTooCoarseError,
    alexandrov_derivative,
    bracket_log_eps,
    default_grid_level,
    direction_grid,
    l0_combination,
    parse_grid_level,
    volume_bounds,
)
from .measures import MC_SAMPLES, MC_SEED, cone_volume_measure, gaussian_samples_stats, log_minkowski_gap, match_atoms
from .report import Bound, Report
from .symmetry import (
    PreconditionError,
    as_reflection,
    chamber_cone,
    cone_map_phi,
    fix_space,
    generate_group,
    is_invariant,
    named_reflections,
    normal_cone_check,
    orthogonalize,
    positivity_check,
    sign_maps,
    tiling_reps,
    unconditionalize,
)


class InputError(ValueError):
    """Bad inputs or violated preconditions (CLI exit code 3)."""


class StageError(RuntimeError):
    def __init__(self, stage, err):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {err}")


@dataclass
class HarnessConfig:
    lambdas: tuple = (0.25, 0.5, 0.75)
    grid_level: str | None = None
    seed: int = MC_SEED
    mc_samples: int = MC_SAMPLES
    reflections: str = "sign"
    fan: bool = True
    refine: int = 2
    normal_samples: int = 2000
    factors: tuple | None = None

    def flags(self) -> list[str]:
        lam = ",".join(repr(float(x)) for x in self.lambdas)
        return [f"lambda={lam}", f"grid={self.grid_level}", f"seed={self.seed}", f"mc={self.mc_samples}",
                f"reflections={self.reflections}", f"fan={self.fan}", f"refine={self.refine}",
                f"normals={self.normal_samples}", f"factors={self.factors}"]


# ---------------------------------------------------------------------------
# shared helpers


def parse_reflections(spec: str, n: int):
    """A named set (``sign``, ``dihedral-<m>``, ``b<n>``) or a structured spec:
    ``{base:sign, conjugate:[[...]]}`` (conjugate the named set by a matrix ``S``:
    ``S A S^-1``) or ``{matrices:[[[...]], ...]}``."""
    s = spec.strip()
    try:
        if not s.startswith("{"):
            return named_reflections(s, n)
        v = specfmt.parse_spec(s)
        if "matrices" in v:
            mats = [np.array(m, dtype=float) for m in v["matrices"]]
        else:
            base = named_reflections(str(v.get("base", "sign")), n)
            S = np.array(v["conjugate"], dtype=float)
            Sinv = np.linalg.inv(S)
            mats = [S @ r.matrix @ Sinv for r in base]
    except (KeyError, ValueError, np.linalg.LinAlgError) as e:
        raise InputError(f"bad reflection spec {spec!r}: {e}") from None
    refs = []
    for A in mats:
        if A.shape != (n, n):
            raise InputError(f"reflection matrix shape {A.shape} does not match dimension {n}")
        r = as_reflection(A)
        if r is None:
            raise InputError("a supplied matrix is not a linear reflection")
        refs.append(r)
    return refs


def require_symmetric(bodies, refs, names=("K", "L")):
    for name, b in zip(names, bodies):
        for r in refs:
            if not is_invariant(b, r.matrix):
                raise InputError(f"{name} is not invariant under the reflection with mirror normal "
                                 f"{np.round(r.nvec, 6).tolist()}")
    if fix_space(generate_group(refs)).dim != 0:
        raise InputError("the mirrors do not intersect in {0}")


def require_polytope(body, name):
    P = as_polytope(body)
    if P is None:
        raise InputError(f"{name} must be a polytope for this command")
    return P


def _same_dim(K, L):
    if K.dim != L.dim:
        raise InputError(f"dimension mismatch: {K.dim} vs {L.dim}")


def make_grid(n: int, cfg: HarnessConfig) -> DirectionGrid:
    try:
        return parse_grid_level(n, cfg.grid_level)
    except (ValueError, KeyError) as e:
        raise InputError(str(e)) from None


def refine_grid(grid: DirectionGrid) -> DirectionGrid:
    family, _, k = grid.label.split("+")[0].split("|")[0].rpartition("-")
    n = grid.dim
    if family == "circle":
        return direction_grid(n, 2 * int(k))
    if family == "icosahedral":
        return direction_grid(n, int(k) + 1)
    if family == "lattice":
        return direction_grid(n, 2 * int(k) - 1)
    return grid


def _lam_tag(lam) -> str:
    return f"lambda={float(lam):g}"


def _bracket(K, L, lam, grid, cfg, report, refine=None):
    """L0 bracket with optional refinement while the sound margin is inconclusive."""
    refine = cfg.refine if refine is None else refine
    for attempt in range(refine + 1):
        try:
            w = l0_combination(K, L, lam, grid, fan=cfg.fan)
        except GridTooCoarseError as e:
            if attempt == refine:
                raise
            report.notes.append(f"{_lam_tag(lam)}: {e}; refining")
            grid = refine_grid(grid)
            continue
        yield w
        if attempt < refine:
            grid = refine_grid(grid)
            report.notes.append(f"{_lam_tag(lam)}: refining to {grid.label}")


def _log_target(VK, VL, lam):
    return (1 - lam) * math.log(VK) + lam * math.log(VL)


# ---------------------------------------------------------------------------
# commands


def verify_logbm(K, L, cfg: HarnessConfig, inputs=()) -> Report:
    _same_dim(K, L)
    refs = parse_reflections(cfg.reflections, K.dim)
    require_symmetric((K, L), refs)
    P, Q = require_polytope(K, "K"), require_polytope(L, "L")
    VK, VL = volume(P), volume(Q)
    grid = make_grid(K.dim, cfg)
    rep = Report("verify-logbm", [*inputs, *cfg.flags()], cfg.seed, grid.label)
    for lam in cfg.lambdas:
        rhs = _log_target(VK, VL, lam)
        try:
            for w in _bracket(K, L, lam, grid, cfg, rep):
                lo, up = volume_bounds(w)
                margin = math.log(lo) - rhs if lo > 0 else -math.inf
                if margin >= -1e-10:
                    break
        except GridTooCoarseError as e:
            rep.inconclusive(f"logbm[{_lam_tag(lam)}]", str(e))
            continue
        eps = bracket_log_eps(w)
        note = f"bracket [{lo:.17g}, {up:.17g}] inner_factor={w.inner_factor:.17g} grid={w.grid.label}"
        rep.assert_geq(f"logbm[{_lam_tag(lam)}]", math.log(lo), Bound.LOWER, rhs, Bound.EXACT, eps, note)
        rep.info(f"logbm.upper[{_lam_tag(lam)}]", math.log(up), rhs, eps)
    return rep


def verify_logm(K, L, cfg: HarnessConfig, inputs=(), alexandrov: bool = True) -> Report:
    _same_dim(K, L)
    refs = parse_reflections(cfg.reflections, K.dim)
    require_symmetric((K, L), refs)
    P, Q = require_polytope(K, "K"), require_polytope(L, "L")
    VK, VL = volume(P), volume(Q)
    n = K.dim
    grid = make_grid(n, cfg) if cfg.grid_level else direction_grid(n, {1: 0, 2: 360, 3: 3, 4: 8}[n])
    rep = Report("verify-logm", [*inputs, *cfg.flags()], cfg.seed, grid.label)
    for (A, VA, B, VB, tag) in ((P, VK, Q, VL, "K,L"), (Q, VL, P, VK, "L,K")):
        gap = log_minkowski_gap(A, B, VB)
        rhs = VA / n * math.log(VB / VA)
        rep.assert_geq(f"logm[{tag}]", gap + rhs, Bound.EXACT, rhs, Bound.EXACT, 1e-9 * max(VA, 1.0))
    if alexandrov:
        ar = alexandrov_derivative(P, Q, grid=grid)
        tol = max(ar.error, 1e-3 * abs(ar.I1), 1e-9 * VK)
        rep.assert_close("alexandrov.slope-vs-I1", ar.extrapolated, ar.I1, tol, False,
                         "I1 = integral of h_K log(h_L/h_K) dS_K")
        rep.info("alexandrov.slope-vs-I1/n", ar.extrapolated, ar.I2, max(ar.error, 1e-3 * abs(ar.I2)),
                 "matches" if ar.matches_I2 else "does not match")
        rep.notes += [f"alexandrov: {x}" for x in ar.notes]
        rep.notes.append("alexandrov slopes: " + ", ".join(f"t={t:g}: {s:.17g}" for t, s in zip(ar.t_steps, ar.slopes)))
    return rep


def _partition_str(parts) -> str:
    if len(parts) == 1:
        return "irreducible"
    return ",".join("{" + ",".join(str(i) for i in p) + "}" for p in parts)


def _components(n, edges) -> list[list[int]]:
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    if edges:
        i, j = zip(*edges)
    else:
        i = j = ()
    A = coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    _, lab = connected_components(A, directed=False)
    parts = {}
    for k, c in enumerate(lab):
        parts.setdefault(c, []).append(k + 1)
    return sorted(parts.values())


@dataclass
class DirectSumResult:
    partition: list
    normals_checked: int
    max_corner_product: float  # max |u_1 u_n| over the normals used
    notes: list = field(default_factory=list)

    @property
    def irreducible(self) -> bool:
        return len(self.partition) == 1

    def __str__(self):
        return _partition_str(self.partition)


def sampled_smooth_normals(body: QuadricBody, count: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    out = []
    while len(out) < count:
        d = rng.standard_normal(body.dim)
        d /= np.linalg.norm(d)
        x = radial(body, d) * d
        nu = boundary_normal(body, x)
        if not isinstance(nu, str):
            out.append(nu)
    return np.array(out)


def detect_direct_sum(body, samples: int = 2000, seed: int = MC_SEED, tol: float = 1e-8) -> DirectSumResult:
    """Coordinates ``i ~ j`` when some (smooth) normal has both coordinates nonzero;
    the connected components are the direct-sum blocks."""
    n = body.dim
    P = as_polytope(body)
    if P is not None:
        for S in sign_maps(n):
            if not is_invariant(P, S):
                raise InputError("detect-sum needs an unconditional body")
        U = np.array([f.normal for f in facets(P)])
    elif isinstance(body, QuadricBody):
        U = sampled_smooth_normals(body, samples, seed)
    else:
        raise InputError("detect-sum needs a polytope or a quadric body")
    big = np.abs(U) > tol
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if np.any(big[:, i] & big[:, j])]
    corner = float(np.abs(U[:, 0] * U[:, -1]).max()) if n > 1 else 0.0
    return DirectSumResult(_components(n, edges), len(U), corner)


def detect_sum(K, cfg: HarnessConfig, inputs=()) -> Report:
    rep = Report("detect-sum", [*inputs, *cfg.flags()], cfg.seed, "none")
    res = detect_direct_sum(K, cfg.normal_samples, cfg.seed)
    rep.info("blocks", len(res.partition), 1, note=str(res))
    rep.info("normals-checked", res.normals_checked, 0)
    rep.info("max|u_1*u_n|", res.max_corner_product, 0.0, 1e-8)
    rep.notes.append(f"partition: {res}")
    return rep


def _expected_partition(children) -> list[list[int]]:
    """Join of the children's own partitions, shifted into their coordinate blocks."""
    out, off = [], 0
    for c in children:
        b = specfmt.build_body(c)
        try:
            sub = detect_direct_sum(b).partition
        except InputError:
            sub = [list(range(1, b.dim + 1))]
        out += [[off + i for i in p] for p in sub]
        off += b.dim
    return sorted(out)


def equality_suite(K_loaded, L_loaded, cfg: HarnessConfig, inputs=()) -> Report:
    K = K_loaded.body
    children = specfmt.children_of(K_loaded.spec) or [K_loaded.spec]
    if L_loaded is None:
        if cfg.factors is None or len(cfg.factors) != len(children):
            raise InputError(f"need {len(children)} dilation factors (one per component) or an L spec")
        L_spec = {"kind": "direct-sum",
                  "children": [{"kind": "transform", "matrix": (float(c) * np.eye(specfmt.build_body(ch).dim)).tolist(),
                                "child": ch} for ch, c in zip(children, cfg.factors)]}
        L = direct_sum([scale(specfmt.build_body(ch), float(c)) for ch, c in zip(children, cfg.factors)])
        inputs = (*inputs, specfmt.emit_spec(L_spec))
    else:
        L = L_loaded.body
    _same_dim(K, L)
    refs = parse_reflections(cfg.reflections, K.dim)
    require_symmetric((K, L), refs)
    P, Q = require_polytope(K, "K"), require_polytope(L, "L")
    VK, VL = volume(P), volume(Q)
    grid = make_grid(K.dim, cfg)
    rep = Report("equality-suite", [*inputs, *cfg.flags()], cfg.seed, grid.label)
    for lam in cfg.lambdas:
        rhs = _log_target(VK, VL, lam)
        try:
            w = l0_combination(P, Q, lam, grid, fan=cfg.fan)
        except GridTooCoarseError as e:
            rep.inconclusive(f"equality[{_lam_tag(lam)}]", str(e))
            continue
        lo, up = volume_bounds(w)
        eps = bracket_log_eps(w)
        margin = math.log(lo) - rhs
        note = "strict inequality (no equality)" if margin > eps else ""
        rep.assert_close(f"equality[{_lam_tag(lam)}]", math.log(lo), rhs, eps, True, note)
    try:
        dK = detect_direct_sum(P)
        dL = detect_direct_sum(Q)
    except InputError as e:
        rep.notes.append(f"direct-sum detector skipped: {e}")
    else:
        expected = _expected_partition(children)
        rep.assert_true("detector[K]", dK.partition == expected, f"found {dK}, expected {_partition_str(expected)}")
        rep.assert_true("detector[L]", dL.partition == expected, f"found {dL}, expected {_partition_str(expected)}")
    return rep


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (InputError, PreconditionError) as e:
        raise InputError(f"stage {name!r}: {e}") from e
    except GeometryError as e:
        raise StageError(name, e) from e


def symmetrize(K, cfg: HarnessConfig, inputs=()) -> Report:
    P = require_polytope(K, "K")
    n = P.dim
    refs = parse_reflections(cfg.reflections, n)
    rep = Report("symmetrize", [*inputs, *cfg.flags()], cfg.seed, "none")
    _stage("precondition", require_symmetric, (P,), refs, ("K",))
    if not all(r.is_orthogonal for r in refs):
        o = _stage("orthogonalize", orthogonalize, P, refs)
        rep.assert_close("orthogonalize.deviation", o.deviation, 0.0, 1e-7, True)
        VP = volume(P)
        rep.assert_close("orthogonalize.volume", volume(o.body), abs(np.linalg.det(o.phi)) * VP,
                         1e-8 * VP * abs(np.linalg.det(o.phi)), True)
        rep.notes.append(f"Phi_L = {np.array2string(o.phi, precision=17, separator=',')}")
        P, refs = canonicalize(o.body), o.reflections
    G = _stage("generate_group", generate_group, refs)
    C = _stage("chamber_cone", chamber_cone, G)
    reps = _stage("tiling_reps", tiling_reps, G, C)
    Phi = _stage("cone_map_phi", cone_map_phi, C)
    rep.assert_true("positivity", positivity_check(C))
    U = _stage("unconditionalize", unconditionalize, P, C, Phi)
    l = len(reps)
    VK, VKC, VB = volume(P), volume(U.slice), volume(U.body)
    det = abs(float(np.linalg.det(Phi)))
    rep.assert_close("group-order=chambers", G.order, l, 0.0, True)
    rep.assert_close("V(K)=l*V(K∩C)", VK, l * VKC, 1e-8 * VK, True)
    rep.assert_close("V(Kbar)=2^n|detPhi|V(K∩C)", VB, 2 ** n * det * VKC, 1e-8 * VB, True)
    rep.assert_close("hull-excess", U.hull_excess, 0.0, 1e-9, True)
    rep.assert_true("Kbar-unconditional", all(is_invariant(U.body, S) for S in sign_maps(n)))
    nc = normal_cone_check(P, C)
    rep.assert_true("normal-cone", nc.ok, f"{nc.checked} facets meet the open chamber")
    rep.notes.append(f"group order {G.order}, chambers {l}")
    rep.notes.append(f"chamber generators = {np.array2string(C.generators, precision=17, separator=',')}")
    rep.notes.append(f"Phi = {np.array2string(Phi, precision=17, separator=',')}")
    rep.notes.append(f"Kbar = {specfmt.emit_spec(specfmt.vrep_spec(U.body))}")
    return rep


def _delta_stderr(grad, cov, N) -> float:
    return float(math.sqrt(max(grad @ cov @ grad, 0.0) / N))


def gaussian_suite(K, L, cfg: HarnessConfig, inputs=()) -> Report:
    _same_dim(K, L)
    n = K.dim
    refs = parse_reflections(cfg.reflections, n)
    if not all(r.is_orthogonal for r in refs):
        raise InputError("gaussian-suite needs orthogonal reflections")
    require_symmetric((K, L), refs)
    P, Q = require_polytope(K, "K"), require_polytope(L, "L")
    grid = make_grid(n, cfg)
    rep = Report("gaussian-suite", [*inputs, *cfg.flags()], cfg.seed, grid.label)
    bodies = [P, Q]
    slots = []
    for lam in cfg.lambdas:
        w = l0_combination(P, Q, lam, grid, fan=cfg.fan)
        M = minkowski_sum(scale(P, 1 - lam), scale(Q, lam))
        slots.append((lam, len(bodies), w))
        bodies += [w.side("inner"), w.side("outer"), M]
    mean, cov = gaussian_samples_stats(bodies, n, cfg.mc_samples, cfg.seed)
    N = cfg.mc_samples
    gK, gL = mean[0], mean[1]
    for lam, i, w in slots:
        gin, gout, gM = mean[i], mean[i + 1], mean[i + 2]
        tag = _lam_tag(lam)
        rhs = gK ** (1 - lam) * gL ** lam
        for j, side in ((i, "inner"), (i + 1, "outer")):
            g = np.zeros(len(mean))
            g[j] = 1.0
            g[0] -= (1 - lam) * rhs / gK
            g[1] -= lam * rhs / gL
            se = _delta_stderr(g, cov, N)
            if side == "inner":
                row = rep.assert_statistical(f"gauss-logbm[{tag}]", gin, rhs, se,
                                             note="L0 body via inner bracket (sound side)")
            else:
                row = rep.info(f"gauss-logbm.outer[{tag}]", gout, rhs, 3 * se, "outer bracket")
            if row.margin > 3 * se:
                rep.notes.append(f"{row.check}: margin significant (> 3 stderr)")
        lhs = gM ** (1 / n)
        rhs17 = (1 - lam) * gK ** (1 / n) + lam * gL ** (1 / n)
        g = np.zeros(len(mean))
        g[i + 2] = gM ** (1 / n - 1) / n
        g[0] -= (1 - lam) * gK ** (1 / n - 1) / n
        g[1] -= lam * gL ** (1 / n - 1) / n
        se = _delta_stderr(g, cov, N)
        row = rep.assert_statistical(f"gauss-minkowski[{tag}]", lhs, rhs17, se)
        if row.margin > 3 * se:
            rep.notes.append(f"{row.check}: margin significant (> 3 stderr)")
    rep.notes.append(f"gaussian measures: K={gK:.17g} L={gL:.17g} (N={N})")
    return rep


def _block_projection(P: VPolytope, block) -> VPolytope:
    return canonicalize(VPolytope(P.vertices[:, [i - 1 for i in block]]))


def homothetic_blocks(P: VPolytope, Q: VPolytope, tol: float = 1e-8):
    """Split both bodies along a common direct-sum partition and test each block pair
    for homothety about the origin.  Returns ``(ok, partition, factors)``."""
    n = P.dim
    try:
        pK, pL = detect_direct_sum(P).partition, detect_direct_sum(Q).partition
        edges = []
        for part in pK + pL:
            edges += [(part[0] - 1, j - 1) for j in part[1:]]
        partition = _components(n, edges)
    except InputError:
        partition = [list(range(1, n + 1))]
    ok, factors = True, []
    for block in partition:
        A, B = _block_projection(P, block), _block_projection(Q, block)
        c = (volume(A) / volume(B)) ** (1.0 / len(block)) if len(block) > 1 else (
            float(np.ptp(A.vertices)) / float(np.ptp(B.vertices)))
        factors.append(c)
        C = c * B.vertices
        same = len(C) == len(A.vertices) and all(np.abs(C - a).max(axis=1).min() <= tol * max(1.0, np.abs(a).max())
                                                  for a in A.vertices)
        ok &= bool(same)
    return ok, partition, factors


def uniqueness(K, L, cfg: HarnessConfig, inputs=()) -> Report:
    _same_dim(K, L)
    refs = parse_reflections(cfg.reflections, K.dim)
    require_symmetric((K, L), refs)
    P, Q = require_polytope(K, "K"), require_polytope(L, "L")
    grid = make_grid(K.dim, cfg)
    rep = Report("uniqueness", [*inputs, *cfg.flags()], cfg.seed, grid.label)
    equal, where, diff = match_atoms(cone_volume_measure(P), cone_volume_measure(Q), 1e-8)
    VK, VL = volume(P), volume(Q)
    if equal:
        rep.info("cone-volume.max-atom-diff", diff, 0.0, 1e-8, "V_K = V_L")
        rep.assert_close("volumes-equal", VK, VL, 1e-9 * VK, True)
        ok, partition, factors = homothetic_blocks(P, Q)
        rep.assert_true("homothetic-blocks", ok, f"partition {_partition_str(partition)}, factors "
                        + ", ".join(f"{c:.12g}" for c in factors))
        w = l0_combination(P, Q, 0.5, grid, fan=cfg.fan)
        lo, _ = volume_bounds(w)
        rep.assert_close("profile-flat[lambda=0.5]", math.log(lo), _log_target(VK, VL, 0.5),
                         bracket_log_eps(w), True)
    else:
        rep.info("cone-volume.max-atom-diff", diff, 0.0, 1e-8,
                 f"V_K != V_L; largest discrepancy at u={np.round(where, 9).tolist()}")
    return rep
