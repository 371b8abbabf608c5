"""Named bodies used by tests, scripts and the body-spec format."""
from __future__ import annotations

import itertools
import math

import numpy as np

from .geometry import QuadricBody, VPolytope, canonicalize, volume, scale


def cube(n: int = 3, a: float = 1.0) -> VPolytope:
    return VPolytope(a * np.array(list(itertools.product([-1.0, 1.0], repeat=n))))


def box(halfwidths) -> VPolytope:
    b = np.asarray(halfwidths, dtype=float)
    return VPolytope(np.array(list(itertools.product([-1.0, 1.0], repeat=len(b)))) * b)


def cross_polytope(n: int = 3, r: float = 1.0) -> VPolytope:
    return VPolytope(r * np.vstack([np.eye(n), -np.eye(n)]))


def regular_polygon(m: int, circumradius: float = 1.0, phase: float = 0.0) -> VPolytope:
    t = phase + 2 * np.pi * np.arange(m) / m
    return VPolytope(circumradius * np.column_stack([np.cos(t), np.sin(t)]))


def hexagon(circumradius: float = 1.0) -> VPolytope:
    return regular_polygon(6, circumradius)


def square(a: float = 1.0) -> VPolytope:
    return cube(2, a)


def segment(a: float = 1.0) -> VPolytope:
    return VPolytope(np.array([[-a], [a]]))


def simplex(n: int = 3) -> VPolytope:
    """conv{0, e_1, ..., e_n}."""
    return VPolytope(np.vstack([np.zeros(n), np.eye(n)]))


def cylinders(n: int = 3, rho: float = 1.0) -> QuadricBody:
    """``{sum_{i<n} x_i^2 <= rho^2} ∩ {sum_{i>1} x_i^2 <= rho^2}``: not a direct sum,
    yet no smooth normal has all coordinates nonzero."""
    if n < 3:
        raise ValueError("the two-cylinder body needs n >= 3")
    return QuadricBody(n, ((tuple(range(n - 1)), rho), (tuple(range(1, n)), rho)))


def with_volume(P: VPolytope, target: float) -> VPolytope:
    """Dilate ``P`` about the origin to the given volume."""
    return scale(P, (target / volume(P)) ** (1.0 / P.dim))


NAMED = {
    "cube": lambda n=3: cube(n),
    "cross-polytope": lambda n=3: cross_polytope(n),
    "square": lambda n=2: cube(2),
    "hexagon": lambda n=2: hexagon(),
    "segment": lambda n=1: segment(),
    "simplex": lambda n=3: simplex(n),
    "cylinders": lambda n=3: cylinders(n),
}
# shorthand names with the dimension baked in
ALIASES = {
    "hexagon2d": ("hexagon", 2),
    "square2d": ("square", 2),
    "segment1d": ("segment", 1),
    "diamond2d": ("cross-polytope", 2),
}


def named(name: str, n: int | None = None):
    if name in ALIASES:
        base, dim = ALIASES[name]
        if n is not None and n != dim:
            raise ValueError(f"fixture {name!r} is {dim}-dimensional, not {n}")
        name, n = base, dim
    if name.startswith("polygon-"):
        return regular_polygon(int(name.split("-", 1)[1]))
    if name not in NAMED:
        raise KeyError(f"unknown fixture {name!r}")
    fn = NAMED[name]
    return fn() if n is None else fn(n)


def random_unconditional(n: int, k: int, rng: np.random.Generator) -> VPolytope:
    """Hull of ``k`` random positive points reflected through all sign patterns."""
    pts = rng.uniform(0.2, 1.0, size=(k, n))
    pts = np.vstack([pts, 0.9 * np.eye(n)])
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=n)))
    return canonicalize(VPolytope((signs[:, None, :] * pts[None, :, :]).reshape(-1, n)))


def random_dihedral(m: int, k: int, rng: np.random.Generator) -> VPolytope:
    """Random planar polygon invariant under the dihedral group of order 2m."""
    r = rng.uniform(0.5, 1.0, size=k)
    t = rng.uniform(0.0, math.pi / m, size=k)
    pts = []
    for j in range(m):
        rot = 2 * math.pi * j / m
        for rr, tt in zip(r, t):
            pts.append([rr * math.cos(rot + tt), rr * math.sin(rot + tt)])
            pts.append([rr * math.cos(rot - tt), rr * math.sin(rot - tt)])
    return canonicalize(VPolytope(np.array(pts)))
