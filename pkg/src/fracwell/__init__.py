"""Singularly perturbed double-well energies of fractional order in one dimension."""

from .energy import (
    EnergyBreakdown,
    EnergyConfig,
    FractionalOrder,
    energy,
    energy_and_gradient,
    gradient,
    local_seminorm,
    norm_factor,
)
from .gagliardo import SeminormForm, assemble_form, seminorm, seminorm_gradient
from .gamma import (
    StepFunction,
    TransitionReport,
    build_recovery,
    check_interpolation,
    check_l2_bound,
    count_transitions,
    cross_term,
    gamma_experiment,
)
from .grid import (
    DerivativeSamples,
    GridFunction,
    Grid1D,
    GridMismatchError,
    InvalidDomainError,
    OrderTooHighError,
    derivative,
    integrate,
    make_grid,
)
from .optimize import Constraints, MinimizeResult, NonFiniteEnergyError, minimize
from .potential import DoubleWell, HypothesisViolation, check_hypotheses, quartic_well, tabulated_well
from .profile import ProfileProblem, ProfileResult, solve_profile, sweep_s, sweep_T

__version__ = "0.1.0"

__all__ = [
    "Constraints",
    "DerivativeSamples",
    "DoubleWell",
    "EnergyBreakdown",
    "EnergyConfig",
    "FractionalOrder",
    "Grid1D",
    "GridFunction",
    "GridMismatchError",
    "HypothesisViolation",
    "InvalidDomainError",
    "MinimizeResult",
    "NonFiniteEnergyError",
    "OrderTooHighError",
    "ProfileProblem",
    "ProfileResult",
    "SeminormForm",
    "StepFunction",
    "TransitionReport",
    "assemble_form",
    "build_recovery",
    "check_hypotheses",
    "check_interpolation",
    "check_l2_bound",
    "count_transitions",
    "cross_term",
    "derivative",
    "energy",
    "energy_and_gradient",
    "gamma_experiment",
    "gradient",
    "integrate",
    "local_seminorm",
    "make_grid",
    "minimize",
    "norm_factor",
    "quartic_well",
    "seminorm",
    "seminorm_gradient",
    "solve_profile",
    "sweep_T",
    "sweep_s",
    "tabulated_well",
]
