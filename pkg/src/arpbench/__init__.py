"""Adaptive higher-order regularization solver with a replayable audit trail."""

from .driver import SolverConfig, Trace, solve
from .problems import builtin_suite, evaluate_bundle, get_problem

__version__ = "0.1.0"

__all__ = [
    "SolverConfig",
    "Trace",
    "solve",
    "builtin_suite",
    "evaluate_bundle",
    "get_problem",
    "__version__",
]
