"""Optimal and 2-opt stable Euclidean matchings and tours with p-costs."""

from .btsp import AlternatingTour, AlternatingTSPSolver
from .experiments import ExperimentConfig, loglog_fit
from .geometry import ReplicateSeed, check_density_event, sample_uniform_cloud, sample_uniform_clouds
from .matching import BipartiteMatcher, edge_energy_constants, solve_matching_exact
from .tsp import TSPSolver

__version__ = "0.1.0"

__all__ = [
    "AlternatingTour",
    "AlternatingTSPSolver",
    "BipartiteMatcher",
    "ExperimentConfig",
    "ReplicateSeed",
    "TSPSolver",
    "check_density_event",
    "edge_energy_constants",
    "loglog_fit",
    "sample_uniform_cloud",
    "sample_uniform_clouds",
    "solve_matching_exact",
]
