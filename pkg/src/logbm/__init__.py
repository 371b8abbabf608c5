"""Numerical toolkit for L0 (log-Minkowski) combinations, reflection-group
symmetrization and cone-volume measures, with a verification harness."""

from .geometry import (
    Ellipsoid,
    HPolytope,
    OracleBody,
    QuadricBody,
    VPolytope,
    facets,
    hrep_from_vrep,
    loewner_ellipsoid,
    minkowski_sum,
    support,
    volume,
    vrep_from_hrep,
)
from .l0 import DirectionGrid, WulffApprox, direction_grid, l0_combination, volume_bounds
from .measures import SphericalAtomMeasure, cone_volume_measure, gaussian_measure, surface_area_measure
from .specfmt import parse_body_spec

__all__ = [
    "DirectionGrid", "Ellipsoid", "HPolytope", "OracleBody", "QuadricBody", "SphericalAtomMeasure",
    "VPolytope", "WulffApprox", "cone_volume_measure", "direction_grid", "facets", "gaussian_measure",
    "hrep_from_vrep", "l0_combination", "loewner_ellipsoid", "minkowski_sum", "parse_body_spec",
    "support", "surface_area_measure", "volume", "volume_bounds", "vrep_from_hrep",
]
