"""Simulation and criterion-checking lab for Cohen-Grossberg neural network
models with unbounded discrete and distributed delays."""

from .criteria import (
    asymptotic_gap,
    find_weights,
    h7_limsup,
    h7_value,
    pair_convergence,
    validate_hypotheses,
)
from .dde_core import IntegratorOptions, Trajectory, integrate
from .experiments import builtin, periodicity_defect, run_recipe
from .exprlang import estimate_bound, eval_expr, parse_expr
from .memory import History, history_new
from .model import (
    AsymptoticPair,
    ModelSpec,
    build_model,
    kernel_mass,
    kernel_tail_cutoff,
)

__version__ = "0.1.0"

__all__ = [
    "AsymptoticPair",
    "History",
    "IntegratorOptions",
    "ModelSpec",
    "Trajectory",
    "asymptotic_gap",
    "builtin",
    "build_model",
    "estimate_bound",
    "eval_expr",
    "find_weights",
    "h7_limsup",
    "h7_value",
    "history_new",
    "integrate",
    "kernel_mass",
    "kernel_tail_cutoff",
    "pair_convergence",
    "parse_expr",
    "periodicity_defect",
    "run_recipe",
    "validate_hypotheses",
]
