"""
Absorbing quantum walks on the line and on the hypercube.

The compiled kernels in :mod:`qwabsorb._kernels` are used when the extension
was built; otherwise the NumPy versions in :mod:`qwabsorb._kernels_py` are
selected at import (``QWABSORB_PURE_PYTHON=1`` forces the fallback).
"""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends
from .classical import (ClassicalTimes, MonteCarloEstimate, classical_monte_carlo,
                        classical_times_closed_form, classical_times_linear_solve)
from .errors import (ConfigurationError, ConvergenceError, DomainError, InstabilityError,
                     PreconditionError, QWAbsorbError, ResourceError)
from .hypercube import (HypercubeConfig, distance_table, full_walk_series, full_walk_summary,
                        grover_coin, hypercube_graph)
from .line import (BoundaryAbsorptionEstimate, LineWalkConfig, conjectured_limit,
                   estimate_rm, generalized_hadamard_coin, run_line_walk)
from .reduced import (GeneratingSeries, ReducedChain, SteinSolution, build_reduced_chain,
                      generating_coefficients, reduced_first_passage, reduced_series_totals,
                      solve_stein, spectral_radius_check)
from .walk import (AbsorptionProcess, AbsorptionSummary, FirstPassageSeries, LabeledGraph,
                   StoppingRule, WalkOperator, WalkState, absorb_measure, run_first_passage,
                   summarize)

__all__ = [
    "BACKEND", "available_backends",
    "ClassicalTimes", "MonteCarloEstimate", "classical_monte_carlo",
    "classical_times_closed_form", "classical_times_linear_solve",
    "ConfigurationError", "ConvergenceError", "DomainError", "InstabilityError",
    "PreconditionError", "QWAbsorbError", "ResourceError",
    "HypercubeConfig", "distance_table", "full_walk_series", "full_walk_summary",
    "grover_coin", "hypercube_graph",
    "BoundaryAbsorptionEstimate", "LineWalkConfig", "conjectured_limit", "estimate_rm",
    "generalized_hadamard_coin", "run_line_walk",
    "GeneratingSeries", "ReducedChain", "SteinSolution", "build_reduced_chain",
    "generating_coefficients", "reduced_first_passage", "reduced_series_totals",
    "solve_stein", "spectral_radius_check",
    "AbsorptionProcess", "AbsorptionSummary", "FirstPassageSeries", "LabeledGraph",
    "StoppingRule", "WalkOperator", "WalkState", "absorb_measure", "run_first_passage",
    "summarize",
]
