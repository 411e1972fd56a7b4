"""Discrete Laplacian, weighted norms and sparse linear algebra."""
from ..grid import Grid
from .linalg import (ConvergenceError, InconsistentSystemError, RankDeficientError, eigen_smallest,
                     solve_least_squares, solve_spd)
from .norms import WeightFunction, extend_rho, weighted_norm
from .operator import (SingularMetricError, SparseOperator, assemble_laplacian, dirichlet_split,
                       periodic_laplacian)

__all__ = [
    "Grid", "SparseOperator", "WeightFunction", "assemble_laplacian", "dirichlet_split",
    "periodic_laplacian", "weighted_norm", "extend_rho", "solve_spd", "solve_least_squares",
    "eigen_smallest", "ConvergenceError", "InconsistentSystemError", "RankDeficientError",
    "SingularMetricError",
]
