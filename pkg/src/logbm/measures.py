"""Surface-area and cone-volume measures, the log-Minkowski functional,
Monte-Carlo Gaussian / radial log-concave measures and a grid Prekopa-Leindler check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    GeometryError,
    HPolytope,
    LowerDimensionalError,
    OriginOutsideError,
    VPolytope,
    facets,
    volume,
)

MC_SEED = 0x5EED
MC_SAMPLES = 1_000_000
MC_BATCH = 100_000


@dataclass(frozen=True, eq=False)
class SphericalAtomMeasure:
    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        if np.any(self.weights < 0):
            raise ValueError("atom weights must be nonnegative")

    @property
    def total(self) -> float:
        return float(self.weights.sum())

    def __len__(self):
        return len(self.weights)

    def integrate(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(self.weights * fn(self.directions)))


def _poly(P) -> VPolytope:
    if isinstance(P, HPolytope):
        return P.vrep
    if not isinstance(P, VPolytope):
        raise TypeError("expected a polytope")
    return P


def surface_area_measure(P) -> SphericalAtomMeasure:
    fs = facets(_poly(P))
    return SphericalAtomMeasure(np.array([f.normal for f in fs]), np.array([f.area for f in fs]))


def cone_volume_measure(P) -> SphericalAtomMeasure:
    """Atoms ``h_j * area_j / n``; total mass is the volume."""
    P = _poly(P)
    fs = facets(P)
    h = np.array([f.offset for f in fs])
    scale = max(1.0, float(np.abs(P.vertices).max()))
    if h.min() <= 1e-12 * scale:
        raise OriginOutsideError()
    w = h * np.array([f.area for f in fs]) / P.dim
    return SphericalAtomMeasure(np.array([f.normal for f in fs]), w)


def log_minkowski_gap(K, L, volume_L: float | None = None) -> float:
    """``∫ log(h_L/h_K) dV_K - V(K)/n * log(V(L)/V(K))``."""
    K = _poly(K)
    cv = cone_volume_measure(K)
    hK = K.support(cv.directions)
    hL = np.asarray(L.support(cv.directions), dtype=float)
    if hL.min() <= 0:
        raise OriginOutsideError("nonpositive support value of L")
    if volume_L is None:
        volume_L = volume(_poly(L))
    vK = volume(K)
    lhs = float(np.sum(cv.weights * np.log(hL / hK)))
    return lhs - vK / K.dim * math.log(volume_L / vK)


def log_support_integral(K, L) -> float:
    """``∫ log h_L dV_K``."""
    cv = cone_volume_measure(K)
    return float(np.sum(cv.weights * np.log(np.asarray(L.support(cv.directions), dtype=float))))


def match_atoms(A: SphericalAtomMeasure, B: SphericalAtomMeasure, tol: float = 1e-8):
    """Largest discrepancy between two atom measures.

    Returns ``(equal, worst_direction, worst_difference)``; atoms present in
    only one measure count with their full weight.
    """
    from scipy.spatial import cKDTree

    worst = (None, 0.0)
    matched_b = set()
    tree = cKDTree(B.directions) if len(B) else None
    for u, w in zip(A.directions, A.weights):
        d, j = tree.query(u) if tree is not None else (np.inf, -1)
        diff = abs(w - B.weights[j]) if d <= tol else w
        if d <= tol:
            matched_b.add(int(j))
        if diff > worst[1]:
            worst = (u, diff)
    for j, (u, w) in enumerate(zip(B.directions, B.weights)):
        if j not in matched_b and w > worst[1]:
            worst = (u, w)
    return worst[1] <= tol, worst[0], worst[1]


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    stderr: float
    samples: int


def _batches(n_samples: int, seed: int, batch: int = MC_BATCH):
    """Counter-based sub-streams: batch ``i`` uses Philox(seed) jumped ``i`` times."""
    base = np.random.Philox(seed)
    done, i = 0, 0
    while done < n_samples:
        k = min(batch, n_samples - done)
        yield i, k, np.random.Generator(base.jumped(i))
        done += k
        i += 1


def _indicator(body, X):
    return np.asarray(body.contains(X), dtype=float)


def gaussian_samples_stats(bodies: Sequence, dim: int, n_samples: int = MC_SAMPLES, seed: int = MC_SEED):
    """Shared-sample Gaussian measures of several bodies.

    Returns ``(means, cov)`` of the membership indicators under the standard
    Gaussian; ``cov`` is the sample covariance (divide by N for the covariance
    of the means).  Using one sample stream for all bodies makes margins
    between them much less noisy than independent estimates.
    """
    k = len(bodies)
    s1 = np.zeros(k)
    s2 = np.zeros((k, k))
    for _, m, rng in _batches(n_samples, seed):
        X = rng.standard_normal(size=(m, dim))
        ind = np.column_stack([_indicator(b, X) for b in bodies])
        s1 += ind.sum(axis=0)
        s2 += ind.T @ ind
    mean = s1 / n_samples
    cov = s2 / n_samples - np.outer(mean, mean)
    return mean, cov


def gaussian_measure(body, n_samples: int = MC_SAMPLES, seed: int = MC_SEED) -> MCEstimate:
    """Standard Gaussian measure (density ``(2 pi)^{-n/2} exp(-|x|^2/2)``)."""
    mean, cov = gaussian_samples_stats([body], body.dim, n_samples, seed)
    return MCEstimate(float(mean[0]), float(math.sqrt(max(cov[0, 0], 0.0) / n_samples)), n_samples)


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Convex ``psi : [0, inf) -> (-inf, inf]`` giving the density ``exp(-psi(|x|))``."""

    psi: Callable[[np.ndarray], np.ndarray]
    t_max: float = 10.0
    n_check: int = 1000

    def __post_init__(self):
        t = np.linspace(0.0, self.t_max, self.n_check)
        v = np.asarray(self.psi(t), dtype=float)
        a, b, c = v[:-2], v[1:-1], v[2:]
        finite = np.isfinite(a) & np.isfinite(c)
        bad = finite & (b > 0.5 * (a + c) + 1e-10 * np.maximum(1.0, np.abs(b)))
        bad |= np.isinf(b) & (b > 0) & finite
        if bad.any():
            raise ValueError("radial profile is not convex on the check grid")

    def density(self, X) -> np.ndarray:
        r = np.linalg.norm(np.atleast_2d(X), axis=1)
        return np.exp(-np.asarray(self.psi(r), dtype=float))


def radial_logconcave_measure(body, profile: RadialProfile, n_samples: int = MC_SAMPLES,
                              seed: int = MC_SEED, half_width: float | None = None) -> MCEstimate:
    """``∫_body exp(-psi(|x|)) dx`` by uniform sampling of a bounding box."""
    n = body.dim
    R = float(half_width if half_width is not None else body.circumradius)
    box_vol = (2 * R) ** n
    s1 = s2 = 0.0
    for _, m, rng in _batches(n_samples, seed):
        X = rng.uniform(-R, R, size=(m, n))
        vals = _indicator(body, X) * profile.density(X)
        s1 += vals.sum()
        s2 += (vals ** 2).sum()
    mean = s1 / n_samples
    var = max(s2 / n_samples - mean ** 2, 0.0)
    return MCEstimate(box_vol * mean, box_vol * math.sqrt(var / n_samples), n_samples)


# ---------------------------------------------------------------------------
# Prekopa-Leindler on a grid


@dataclass
class PLReport:
    lam: Fraction
    pairs_checked: int
    pointwise_violations: int
    worst_pointwise: float
    integral_h: float
    integral_f: float
    integral_g: float
    gap: float
    error_bound: float
    notes: list = field(default_factory=list)

    @property
    def hypothesis_holds(self) -> bool:
        return self.pointwise_violations == 0

    @property
    def violation(self) -> bool:
        return self.gap < -self.error_bound

    @property
    def flagged(self) -> bool:
        return self.violation or not self.hypothesis_holds


def _as_fraction(lam, max_den=16) -> Fraction:
    fr = Fraction(lam).limit_denominator(max_den)
    if abs(float(fr) - float(lam)) > 1e-12 or not 0 < fr < 1:
        raise ValueError(
            f"lambda = {lam} is not p/q with q <= {max_den} in (0, 1); refine the grid spacing "
            f"or choose lambda with a small denominator so convex combinations land on nodes"
        )
    return fr


def _tv_error(F, cell):
    """Riemann-sum error bound: cell volume times the total variation along each axis."""
    err = 0.0
    for ax in range(F.ndim):
        err += np.abs(np.diff(F, axis=ax)).sum()
    return err * cell


def prekopa_leindler_check(f, g, h, lam, spacing, tol: float = 1e-12) -> PLReport:
    """Check ``h((1-lam)x + lam y) >= f(x)^(1-lam) g(y)^lam`` on node pairs and compare integrals.

    ``f, g, h`` are arrays sampled on the same axis-aligned grid with the given
    spacing (scalar or per-axis).  Only node pairs whose convex combination is
    again a node are checked, which requires ``lam = p/q`` with ``q <= 16``.
    """
    F, Gr, Hh = (np.asarray(a, dtype=float) for a in (f, g, h))
    if not (F.shape == Gr.shape == Hh.shape):
        raise ValueError("grids are not aligned")
    fr = _as_fraction(lam)
    p, q = fr.numerator, fr.denominator
    lamf = float(fr)
    shape = F.shape
    idx = np.indices(shape).reshape(len(shape), -1).T
    flatF, flatG, flatH = F.ravel(), Gr.ravel(), Hh.ravel()
    nzF = np.flatnonzero(flatF > 0)
    nzG = np.flatnonzero(flatG > 0)
    pairs = 0
    violations = 0
    worst = 0.0
    Gi = idx[nzG]
    for i in nzF:
        num = (q - p) * idx[i] + p * Gi
        ok = np.all(num % q == 0, axis=1)
        if not ok.any():
            continue
        z = num[ok] // q
        zf = np.ravel_multi_index(z.T, shape)
        need = flatF[i] ** (1 - lamf) * flatG[nzG[ok]] ** lamf
        short = need - flatH[zf]
        pairs += int(ok.sum())
        bad = short > tol * np.maximum(1.0, need)
        violations += int(bad.sum())
        if short.size:
            worst = max(worst, float(short.max()))
    spacing = np.broadcast_to(np.asarray(spacing, dtype=float), (len(shape),))
    cell = float(np.prod(spacing))
    If, Ig, Ih = flatF.sum() * cell, flatG.sum() * cell, flatH.sum() * cell
    rhs = If ** (1 - lamf) * Ig ** lamf
    ef, eg, eh = _tv_error(F, cell), _tv_error(Gr, cell), _tv_error(Hh, cell)
    bound = eh
    if If > 0 and Ig > 0:
        bound += (1 - lamf) * (Ig / If) ** lamf * ef + lamf * (If / Ig) ** (1 - lamf) * eg
    return PLReport(fr, pairs, violations, worst, Ih, If, Ig, Ih - rhs, bound)
