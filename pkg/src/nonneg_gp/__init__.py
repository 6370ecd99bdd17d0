"""Gaussian-process regression with probabilistic non-negativity constraints."""

from .constrained import (
    ConstraintSpec,
    FitResult,
    RestartPolicy,
    check_feasibility,
    constraint_values,
    minimize_constrained,
    minimize_unconstrained,
)
from .errors import (
    DimensionMismatchError,
    NegativeVarianceError,
    NoFeasibleSolutionError,
    NotPositiveDefiniteError,
)
from .gp import FittedGP, TrainingSet, fit, negative_log_likelihood, nll_gradient, predict
from .kernel import Hyperparameters, covariance_matrix, cross_covariance, kernel_eval

__all__ = [
    "ConstraintSpec",
    "DimensionMismatchError",
    "FitResult",
    "FittedGP",
    "Hyperparameters",
    "NegativeVarianceError",
    "NoFeasibleSolutionError",
    "NotPositiveDefiniteError",
    "RestartPolicy",
    "TrainingSet",
    "check_feasibility",
    "constraint_values",
    "covariance_matrix",
    "cross_covariance",
    "fit",
    "kernel_eval",
    "minimize_constrained",
    "minimize_unconstrained",
    "negative_log_likelihood",
    "nll_gradient",
    "predict",
]
