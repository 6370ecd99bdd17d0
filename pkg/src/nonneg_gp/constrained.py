"""Likelihood fitting with probabilistic non-negativity constraints.

The constrained program is

    minimize    NLL(theta)
    subject to  mean(x_c) + cdf_factor * std(x_c) >= 0   for each constraint point
                eps - |y_j - mean(x_j)| >= 0             for each training point

over ``theta = (log_l, log_sigma, log_sigma_n)``. With ``cdf_factor = -2``
the posterior at each constraint point is negative with probability at most
about 2.2%.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import NoFeasibleSolutionError, NotPositiveDefiniteError
from .gp import TrainingSet, fit, nll_and_gradient
from .kernel import Hyperparameters, as_points
from .optimize import auglag, bfgs

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-6
FD_STEP = 1e-6
STD_FLOOR = 1e-150
DEFAULT_THETA0 = Hyperparameters(log_l=-3.0, log_sigma=-3.0, log_sigma_n=-10.0)
AUGLAG_OPTIONS = {"penalty": 1e3, "max_penalty": 1e10}


def cdf_factor_for(eta: float) -> float:
    """Standard-normal quantile ``Phi^{-1}(eta)`` for ``0 < eta < 1/2``."""
    if not 0.0 < eta < 0.5:
        raise ValueError(f"eta must lie in (0, 0.5), got {eta}")
    return float(ndtri(eta))


@dataclass(frozen=True)
class ConstraintSpec:
    """Where and how strictly non-negativity is imposed.

    ``cdf_factor`` is the number of posterior standard deviations (negative)
    that must still sit above zero; -2 corresponds to eta of roughly 2.2%.
    """

    constraint_points: np.ndarray
    cdf_factor: float = -2.0
    data_fit_eps: float = 0.03

    def __post_init__(self):
        pts = as_points(self.constraint_points)
        pts.setflags(write=False)
        object.__setattr__(self, "constraint_points", pts)
        if not self.cdf_factor < 0:
            raise ValueError("cdf_factor must be negative")
        if not self.data_fit_eps > 0:
            raise ValueError("data_fit_eps must be positive")

    @classmethod
    def from_eta(cls, constraint_points, eta: float, data_fit_eps: float = 0.03):
        return cls(constraint_points, cdf_factor_for(eta), data_fit_eps)

    @property
    def m(self) -> int:
        return self.constraint_points.shape[0]


@dataclass(frozen=True)
class RestartPolicy:
    """Random restarts after an infeasible solve.

    Restart ``k`` starts from ``theta0`` plus a standard-normal draw in each
    log-parameter, drawn from ``numpy.random.default_rng(seed)``.
    """

    max_restarts: int = 20
    seed: int = 0


@dataclass(frozen=True)
class FitResult:
    theta: Hyperparameters
    nll: float
    feasible: bool
    max_violation: float
    restarts_used: int
    converged: bool = True
    history: tuple = field(default=(), compare=False, repr=False)


def _posterior_terms(training, theta, spec):
    gp = fit(training, theta)
    mean_c, var_c = gp.predict_many(spec.constraint_points)
    mean_t, _ = gp.predict_many(training.X)
    return gp, mean_c + spec.cdf_factor * np.sqrt(var_c), training.y - mean_t


def constraint_values(training: TrainingSet, theta: Hyperparameters, spec: ConstraintSpec) -> np.ndarray:
    """Constraint vector of length ``m + N``; feasible iff every entry is >= 0.

    The first ``m`` entries are ``mean + cdf_factor * std`` at the constraint
    points, the last ``N`` are ``eps - |y_j - mean(x_j)|``.

    Raises
    ------
    NotPositiveDefiniteError
        If ``theta`` cannot be evaluated.
    """
    _, lower, residual = _posterior_terms(training, theta, spec)
    return np.concatenate([lower, spec.data_fit_eps - np.abs(residual)])


def _smooth_constraints(training, theta, spec):
    # |r| <= eps split into eps - r >= 0 and eps + r >= 0.
    _, lower, residual = _posterior_terms(training, theta, spec)
    eps = spec.data_fit_eps
    return np.concatenate([lower, eps - residual, eps + residual])


def _constraint_weights(training, theta, spec):
    # Bounds at constraint points are measured in posterior standard
    # deviations, data-fit bounds in units of eps. A near-zero target can
    # force std down to 1e-7, where raw values are too small for the penalty.
    gp = fit(training, theta)
    _, var_c = gp.predict_many(spec.constraint_points)
    std = np.maximum(np.sqrt(var_c), STD_FLOOR)
    return np.concatenate([1.0 / std, np.full(2 * training.n, 1.0 / spec.data_fit_eps)])


def check_feasibility(training: TrainingSet, theta: Hyperparameters, spec: ConstraintSpec) -> tuple[bool, float]:
    """Return ``(feasible, max_violation)``; ``(False, inf)`` if unevaluable."""
    try:
        c = constraint_values(training, theta, spec)
    except NotPositiveDefiniteError:
        return False, math.inf
    worst = float(np.min(c))
    return worst >= -FEASIBILITY_TOL, max(0.0, -worst)


class _Problem:
    """Caches objective and constraint evaluations at the last point seen."""

    def __init__(self, training: TrainingSet, spec: ConstraintSpec | None):
        self.training = training
        self.spec = spec
        self._key = None
        self._value = None

    def _evaluate(self, x):
        key = x.tobytes()
        if key == self._key:
            return self._value
        try:
            theta = Hyperparameters.from_array(x)
            f, g = nll_and_gradient(self.training, theta)
            if self.spec is None:
                value = (f, g, None, None)
            else:
                c = _smooth_constraints(self.training, theta, self.spec)
                J = np.empty((c.size, x.size))
                for k in range(x.size):
                    step = np.zeros_like(x)
                    step[k] = FD_STEP
                    plus = _smooth_constraints(self.training, Hyperparameters.from_array(x + step), self.spec)
                    minus = _smooth_constraints(self.training, Hyperparameters.from_array(x - step), self.spec)
                    J[:, k] = (plus - minus) / (2.0 * FD_STEP)
                value = (f, g, c, J)
        except (NotPositiveDefiniteError, OverflowError, ValueError):
            value = (math.inf, None, None, None)
        if value[0] != math.inf and not (np.isfinite(value[0]) and np.all(np.isfinite(value[1]))):
            value = (math.inf, None, None, None)
        if value[3] is not None and not np.all(np.isfinite(value[3])):
            value = (math.inf, None, None, None)
        self._key, self._value = key, value
        return value

    def objective(self, x):
        f, g, _, _ = self._evaluate(x)
        return f, g

    def constraints(self, x):
        _, _, c, J = self._evaluate(x)
        return c, J

    def weights(self, x):
        return _constraint_weights(self.training, Hyperparameters.from_array(x), self.spec)


def minimize_unconstrained(
    training: TrainingSet,
    theta0: Hyperparameters = DEFAULT_THETA0,
    spec: ConstraintSpec | None = None,
    gtol: float = 1e-5,
    max_iter: int = 500,
) -> FitResult:
    """Minimize the NLL over log-hyperparameters with BFGS.

    ``spec``, if given, is used only to report constraint diagnostics on the
    result; it does not influence the fit.
    """
    problem = _Problem(training, None)
    x0 = theta0.to_array()
    if not np.isfinite(problem.objective(x0)[0]):
        raise NotPositiveDefiniteError(theta0, "objective cannot be evaluated at the start point")
    res = bfgs(problem.objective, x0, gtol=gtol, max_iter=max_iter)
    theta = Hyperparameters.from_array(res.x)
    if spec is None:
        feasible, violation = True, 0.0
    else:
        feasible, violation = check_feasibility(training, theta, spec)
    return FitResult(
        theta=theta,
        nll=float(res.fun),
        feasible=feasible,
        max_violation=violation,
        restarts_used=0,
        converged=res.converged,
    )


def _squashed(objective):
    # asinh is strictly increasing, so the constrained minimizer is unchanged,
    # but NLL values near 1e8 (tiny sigma) no longer swamp the penalty terms.
    def wrapped(x):
        f, g = objective(x)
        if not np.isfinite(f):
            return f, g
        return math.asinh(f), g / math.sqrt(1.0 + f * f)
    return wrapped


def _solve_once(training, spec, x0):
    problem = _Problem(training, spec)
    if not np.isfinite(problem.objective(x0)[0]):
        return None
    res = auglag(
        _squashed(problem.objective), problem.constraints, x0,
        ctol=1e-2 * FEASIBILITY_TOL, weights=problem.weights, **AUGLAG_OPTIONS,
    )
    res.fun = problem.objective(res.x)[0]
    theta = Hyperparameters.from_array(res.x)
    feasible, violation = check_feasibility(training, theta, spec)
    return theta, res, feasible, violation


def minimize_constrained(
    training: TrainingSet,
    spec: ConstraintSpec,
    theta0: Hyperparameters = DEFAULT_THETA0,
    restart_policy: RestartPolicy = RestartPolicy(),
) -> FitResult:
    """Minimize the NLL subject to the constraints of ``spec``.

    The first solve starts at ``theta0``. Whenever a solve ends infeasible,
    the next one starts from ``theta0`` plus standard-normal noise, until a
    feasible point is found or ``restart_policy.max_restarts`` restarts are
    spent.

    Raises
    ------
    NoFeasibleSolutionError
        Carrying the least-violating result when every attempt is infeasible.
    """
    rng = np.random.default_rng(restart_policy.seed)
    base = theta0.to_array()
    best = None
    for attempt in range(restart_policy.max_restarts + 1):
        x0 = base if attempt == 0 else base + rng.standard_normal(base.size)
        outcome = _solve_once(training, spec, x0)
        if outcome is None:
            log.debug("attempt %d: start point not evaluable", attempt)
            continue
        theta, res, feasible, violation = outcome
        result = FitResult(
            theta=theta,
            nll=res.fun,
            feasible=feasible,
            max_violation=violation,
            restarts_used=attempt,
            converged=feasible,
            history=tuple(res.history),
        )
        if feasible:
            return result
        log.debug("attempt %d: infeasible, violation %.3g", attempt, violation)
        if best is None or violation < best.max_violation:
            best = result
    raise NoFeasibleSolutionError(best, restart_policy.max_restarts + 1)
