"""Certified key rates for twin-field QKD without phase postselection.

The pipeline runs: honest-channel gains (``channel``), decoy-state yield bounds
(``decoy``), cross-term bounds from phase-locked decoys (``crossterm``),
certified leakage maximization (``leakage``) and key rates (``keyrate``).
"""

from .channel import ChannelParams, GainTable, build_gain_table
from .crossterm import CLASSES, class_intervals, omega_bounds, phi_bounds
from .decoy import IntensityConfig, YieldBounds, bound_yields
from .errors import (ConfigError, DataIntegrityError, DomainError, EstimationError,
                     LpSolverError, NpptfError, StructuralError)
from .keyrate import (MODES, RatePoint, evaluate_point, max_tolerable_loss, optimize_mu,
                      plob_bound, secret_key_rate, sweep)
from .leakage import XConstraints, max_leakage
from .lp import LinearProgram, solve_lp, solve_lp_min

__version__ = "0.1.0"

__all__ = [
    "CLASSES", "MODES", "ChannelParams", "ConfigError", "DataIntegrityError", "DomainError",
    "EstimationError", "GainTable", "IntensityConfig", "LinearProgram", "LpSolverError",
    "NpptfError", "RatePoint", "StructuralError", "XConstraints", "YieldBounds",
    "bound_yields", "build_gain_table", "class_intervals", "evaluate_point", "max_leakage",
    "max_tolerable_loss", "omega_bounds", "optimize_mu", "phi_bounds", "plob_bound",
    "secret_key_rate", "solve_lp", "solve_lp_min", "sweep",
]
