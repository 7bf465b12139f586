"""Random laminations of the disk and the killed label chains behind them."""
from ._jit import BACKEND
from .branching import count_good_paths, kernel_prob, kernel_row, simulate_ray
from .estimators import (Estimate, McConfig, cross_validate_geometry,
                         estimate_mean_good_paths, estimate_nonempty_prob)
from .geometry import Lamination, locate, polygons_disjoint, run_construction, throw_polygon
from .spectral import (ConvergenceError, build_killed_kernel, classify, dominant_eigen,
                       qsd_exact, survival_asymptotics)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ConvergenceError", "Estimate", "Lamination", "McConfig",
    "build_killed_kernel", "classify", "count_good_paths", "cross_validate_geometry",
    "dominant_eigen", "estimate_mean_good_paths", "estimate_nonempty_prob",
    "kernel_prob", "kernel_row", "locate", "polygons_disjoint", "qsd_exact",
    "run_construction", "simulate_ray", "survival_asymptotics", "throw_polygon",
]
