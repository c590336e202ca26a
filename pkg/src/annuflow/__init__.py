"""Basic state and linear stability of thermoconvection in a laterally heated annulus."""

from .basic_state import BasicState, continue_in_dT, initial_guess, newton_solve, solve_basic_state
from .params import DimensionlessGroup, PhysicalConfig, metric_coefficient, to_dimensionless
from .stability import ModeResult, dispersion, growth_rate, reconstruct_3d
from .threshold import ThresholdResult, convergence_study, find_threshold, sweep

__version__ = "0.1.0"

__all__ = [
    "BasicState",
    "DimensionlessGroup",
    "ModeResult",
    "PhysicalConfig",
    "ThresholdResult",
    "continue_in_dT",
    "convergence_study",
    "dispersion",
    "find_threshold",
    "growth_rate",
    "initial_guess",
    "metric_coefficient",
    "newton_solve",
    "reconstruct_3d",
    "solve_basic_state",
    "sweep",
    "to_dimensionless",
]
