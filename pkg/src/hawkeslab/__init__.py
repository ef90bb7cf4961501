"""Simulation and numerical checks for critical Hawkes processes."""
from .cluster import ClusterField, PointConfiguration, cluster_once, iterate_generations, simulate_family
from .distributions import (DisplacementSpec, SymmetrizedSpec, TailSpec, TruncatedSpec,
                            branching_to_truncation, mu_inverse, truncated_mean)
from .errors import LabError
from .renewal_calc import GridMeasure
from .rng import split_stream

__version__ = "0.1.0"

__all__ = [
    "ClusterField", "DisplacementSpec", "GridMeasure", "LabError", "PointConfiguration",
    "SymmetrizedSpec", "TailSpec", "TruncatedSpec", "branching_to_truncation", "cluster_once",
    "iterate_generations", "mu_inverse", "simulate_family", "split_stream", "truncated_mean",
]
