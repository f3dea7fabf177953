"""Extrapolated GBS time steppers with large imaginary stability boundaries.

Exact-rational construction of extrapolation weights, stability analysis,
free-weight optimization along a contour, a parallel integrator, and a
periodic wave-equation harness.
"""

from .extrapolation import (
    CATALOG_CORES,
    CATALOG_NAMES,
    ExtrapolationScheme,
    PartitionPlan,
    catalog_scheme,
    default_plan,
    make_scheme,
    partition_plan,
    solve_full_weights,
    verify_order,
)
from .gbs import ButcherTableau, classical_rk4, gbs_evaluate, gbs_stability_polynomial
from .integrator import IntegrationProblem, integrate, macro_step
from .numkernel import RationalPolynomial
from .optimizer import (
    ContourSpec,
    OptimizedScheme,
    imaginary_axis,
    imaginary_with_bulge,
    maximize_h,
    rationalize_scheme,
    search_fully_determined,
)
from .stability import isb, leading_error, normalized_isb, scheme_evaluator
from .waveharness import WaveRun, convect, convergence_study, error_floor

__version__ = "0.1.0"

__all__ = [
    "CATALOG_CORES",
    "CATALOG_NAMES",
    "ButcherTableau",
    "ContourSpec",
    "ExtrapolationScheme",
    "IntegrationProblem",
    "OptimizedScheme",
    "PartitionPlan",
    "RationalPolynomial",
    "WaveRun",
    "catalog_scheme",
    "classical_rk4",
    "convect",
    "convergence_study",
    "default_plan",
    "error_floor",
    "gbs_evaluate",
    "gbs_stability_polynomial",
    "imaginary_axis",
    "imaginary_with_bulge",
    "integrate",
    "isb",
    "leading_error",
    "macro_step",
    "make_scheme",
    "maximize_h",
    "normalized_isb",
    "partition_plan",
    "rationalize_scheme",
    "scheme_evaluator",
    "search_fully_determined",
    "solve_full_weights",
    "verify_order",
]
