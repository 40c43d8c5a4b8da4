"""Averaging of nearby compact submanifolds in Euclidean space and round spheres."""

__version__ = "0.1.0"

from .ambient import AmbientSpace  # noqa: E402
from .averaging import (  # noqa: E402
    AveragedSection,
    SolverConfig,
    WeightedFamily,
    average_family,
    c1_distance,
    equidistant_oracle,
    invariance_check,
    midpoint,
    morph,
    orbit_family,
)
from .grassmann import Subspace, average_subspaces, finsler_distance, make_subspace  # noqa: E402
from .submanifold import ParametricSubmanifold, nearest_point  # noqa: E402

__all__ = [
    "AmbientSpace", "AveragedSection", "ParametricSubmanifold", "SolverConfig", "Subspace", "WeightedFamily",
    "average_family", "average_subspaces", "c1_distance", "equidistant_oracle", "finsler_distance",
    "invariance_check", "make_subspace", "midpoint", "morph", "nearest_point", "orbit_family",
]
