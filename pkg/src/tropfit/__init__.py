"""Sparse max-plus equation solving and piecewise-linear convex regression.

The library solves A (max-plus) x = b approximately with a minimum-size
support under an lp error budget (greedy cover with a certified ratio),
constructs minimum-max-absolute-error estimates on the same support, and
applies both to fit convex functions with few affine regions.
"""

from .tropical import (
    ShapeError,
    maxplus_add,
    minplus_add,
    maxplus_product,
    minplus_product,
    principal_solution,
    project_on_support,
    support,
)
from .solver import (
    FitProblem,
    GreedyState,
    GreedyTrace,
    Infeasible,
    ProbeReport,
    SparseSolution,
    brute_force_oracle,
    error_inf,
    error_p,
    error_vector,
    greedy_sparse_solve,
    pnorm,
    ratio_certificate,
    smmae_lift,
    submodularity_probe,
    submodularity_ratio,
)
from .regression import (
    Dataset,
    PwlModel,
    Score,
    SlopeSet,
    build_design_matrix,
    evaluate,
    fit,
    gradient_slopes,
    grid_slopes,
    score,
)
from .io_formats import ParseError, ParsedDocument

__version__ = "0.1.0"

__all__ = [
    "ShapeError",
    "maxplus_add",
    "minplus_add",
    "maxplus_product",
    "minplus_product",
    "principal_solution",
    "project_on_support",
    "support",
    "FitProblem",
    "GreedyState",
    "GreedyTrace",
    "Infeasible",
    "ProbeReport",
    "SparseSolution",
    "brute_force_oracle",
    "error_inf",
    "error_p",
    "error_vector",
    "greedy_sparse_solve",
    "pnorm",
    "ratio_certificate",
    "smmae_lift",
    "submodularity_probe",
    "submodularity_ratio",
    "Dataset",
    "PwlModel",
    "Score",
    "SlopeSet",
    "build_design_matrix",
    "evaluate",
    "fit",
    "gradient_slopes",
    "grid_slopes",
    "score",
    "ParseError",
    "ParsedDocument",
    "__version__",
]
