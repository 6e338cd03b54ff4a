"""Deterministic noise models and windowed algebraic estimators on uniform grids."""

from .hypergrid import (
    GridFunction,
    GridSpec,
    eval_estim_term,
    integrate,
    iterated_integral,
    kernel_integral,
    oscillation_norm,
)

__version__ = "0.1.0"

__all__ = [
    "GridFunction",
    "GridSpec",
    "eval_estim_term",
    "integrate",
    "iterated_integral",
    "kernel_integral",
    "oscillation_norm",
]
