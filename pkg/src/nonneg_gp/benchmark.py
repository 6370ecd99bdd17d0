"""Constrained-vs-unconstrained benchmark on three non-negative targets."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .constrained import (
    DEFAULT_THETA0,
    ConstraintSpec,
    RestartPolicy,
    minimize_constrained,
    minimize_unconstrained,
)
from .errors import NoFeasibleSolutionError
from .gp import TrainingSet, fit

log = logging.getLogger(__name__)

HISTOGRAM_BINS = 20


def example1(x):
    x = np.asarray(x, dtype=float)
    return 1.0 / (1.0 + (10.0 * x) ** 4) + 0.5 * np.exp(-100.0 * (x - 0.5) ** 2)


def example2(x):
    x = np.asarray(x, dtype=float)
    u = 2.0 * x - 1.0
    return 0.01 + 0.625 * u**4 * (u**2 + 4.0 * np.sin(5.0 * np.pi * x) ** 2)


def kdv_two_soliton(x, t):
    """Normalized two-soliton solution of ``u_t - 6 u u_x + u_xxx = 0``."""
    x = np.asarray(x, dtype=float)
    num = 12.0 * (3.0 + 4.0 * np.cosh(2.0 * x - 8.0 * t) + np.cosh(4.0 * x - 64.0 * t))
    den = 8.0 * (3.0 * np.cosh(x - 28.0 * t) + np.cosh(3.0 * x - 36.0 * t)) ** 2
    return num / den


def kdv_snapshot(x):
    return kdv_two_soliton(x, -1.0)


@dataclass(frozen=True)
class TargetFunction:
    """A benchmark target with its domain and training-set recipe.

    Training locations are ``a + (b - a) (j - 1) / (n_grid - 1) + e_j`` for
    ``j = 1..n_grid`` with ``e_j ~ N(0, jitter_std^2)`` on interior indices
    only, followed by the fixed ``extra_points``.
    """

    id: str
    domain: tuple[float, float]
    n_grid: int
    extra_points: tuple[float, ...]
    jitter_std: float
    n_constraint_points: int

    def __call__(self, x):
        return _FUNCTIONS[self.id](x)

    @property
    def n_train(self) -> int:
        return self.n_grid + len(self.extra_points)


_FUNCTIONS = {
    "example1": example1,
    "example2": example2,
    "kdv_soliton": kdv_snapshot,
}

TARGETS = {
    "example1": TargetFunction("example1", (0.0, 1.0), 6, (0.5,), 0.03, 30),
    "example2": TargetFunction("example2", (0.0, 1.0), 12, (0.075, 0.925), 0.03, 31),
    "kdv_soliton": TargetFunction("kdv_soliton", (-10.0, 5.0), 11, (-1.4, -8.4), 0.3, 40),
}

# Short aliases accepted by get_target and the CLI.
_ALIASES = {"1": "example1", "2": "example2", "3": "kdv_soliton", "kdv": "kdv_soliton"}


def get_target(name) -> TargetFunction:
    key = _ALIASES.get(str(name), str(name))
    try:
        return TARGETS[key]
    except KeyError:
        raise ValueError(f"unknown target {name!r}; choose from {sorted(TARGETS)}") from None


def eval_target(target: TargetFunction, x):
    return target(x)


def make_training_set(target: TargetFunction, seed: int, jitter_std: float | None = None) -> TrainingSet:
    """Jittered grid plus fixed extra points, observed without noise."""
    rng = np.random.default_rng(seed)
    std = target.jitter_std if jitter_std is None else jitter_std
    a, b = target.domain
    j = np.arange(target.n_grid)
    x = a + (b - a) * j / (target.n_grid - 1)
    x[1:-1] += std * rng.standard_normal(target.n_grid - 2)
    x = np.concatenate([x, target.extra_points])
    return TrainingSet(x[:, None], target(x))


@dataclass(frozen=True)
class TrialConfig:
    target: TargetFunction
    n_constraint_points: int | None = None
    n_test_points: int = 1000
    jitter_std: float | None = None
    seed: int = 0
    cdf_factor: float = -2.0
    data_fit_eps: float = 0.03
    max_restarts: int = 20

    def __post_init__(self):
        if self.n_constraint_points is None:
            object.__setattr__(self, "n_constraint_points", self.target.n_constraint_points)
        if self.jitter_std is None:
            object.__setattr__(self, "jitter_std", self.target.jitter_std)
        if self.n_constraint_points < 1:
            raise ValueError("need at least one constraint point")
        if self.n_test_points < 2:
            raise ValueError("need at least two test points")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be non-negative")

    def with_seed(self, seed: int) -> "TrialConfig":
        return TrialConfig(
            self.target, self.n_constraint_points, self.n_test_points,
            self.jitter_std, seed, self.cdf_factor, self.data_fit_eps,
            self.max_restarts,
        )


def equidistant(domain, n: int) -> np.ndarray:
    """``n`` equally spaced points covering ``domain`` endpoints included."""
    a, b = domain
    if n == 1:
        return np.array([0.5 * (a + b)])
    return np.linspace(a, b, n)


def make_grids(config: TrialConfig) -> tuple[np.ndarray, np.ndarray]:
    return (
        equidistant(config.target.domain, config.n_constraint_points),
        equidistant(config.target.domain, config.n_test_points),
    )


def relative_l2_error(predicted, truth) -> float:
    predicted = np.asarray(predicted, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if predicted.shape != truth.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {truth.shape}")
    denom = float(np.sum(truth**2))
    if denom == 0.0:
        raise ValueError("relative error undefined for an all-zero truth vector")
    return math.sqrt(float(np.sum((predicted - truth) ** 2)) / denom)


def violation_percentage(predicted_means) -> float:
    """Percentage of entries strictly below zero."""
    v = np.asarray(predicted_means, dtype=float)
    if v.size == 0:
        raise ValueError("empty vector")
    return 100.0 * np.count_nonzero(v < 0.0) / v.size


@dataclass(frozen=True)
class TrialReport:
    seed: int
    rel_error_unconstrained: float
    violation_pct_unconstrained: float
    nll_unconstrained: float
    rel_error_constrained: float
    violation_pct_constrained: float
    nll_constrained: float
    feasible: bool
    restarts_used: int
    constraint_violation: float



def run_trial(config: TrialConfig) -> TrialReport:
    """Fit both models on one randomized training set and score them.

    An infeasible constrained fit is recorded with ``feasible=False`` and NaN
    in the constrained metric columns.
    """
    training = make_training_set(config.target, config.seed, config.jitter_std)
    constraint_pts, test_pts = make_grids(config)
    truth = config.target(test_pts)
    spec = ConstraintSpec(constraint_pts[:, None], config.cdf_factor, config.data_fit_eps)

    free = minimize_unconstrained(training, DEFAULT_THETA0)
    mean_free, _ = fit(training, free.theta).predict_many(test_pts[:, None])

    policy = RestartPolicy(config.max_restarts, seed=config.seed)
    try:
        cons = minimize_constrained(training, spec, DEFAULT_THETA0, policy)
    except NoFeasibleSolutionError as exc:
        log.warning("seed %d: %s", config.seed, exc)
        return TrialReport(
            seed=config.seed,
            rel_error_unconstrained=relative_l2_error(mean_free, truth),
            violation_pct_unconstrained=violation_percentage(mean_free),
            nll_unconstrained=free.nll,
            rel_error_constrained=math.nan,
            violation_pct_constrained=math.nan,
            nll_constrained=math.nan if exc.best is None else exc.best.nll,
            feasible=False,
            restarts_used=config.max_restarts,
            constraint_violation=math.inf if exc.best is None else exc.best.max_violation,
        )
    mean_cons, _ = fit(training, cons.theta).predict_many(test_pts[:, None])
    return TrialReport(
        seed=config.seed,
        rel_error_unconstrained=relative_l2_error(mean_free, truth),
        violation_pct_unconstrained=violation_percentage(mean_free),
        nll_unconstrained=free.nll,
        rel_error_constrained=relative_l2_error(mean_cons, truth),
        violation_pct_constrained=violation_percentage(mean_cons),
        nll_constrained=cons.nll,
        feasible=True,
        restarts_used=cons.restarts_used,
        constraint_violation=cons.max_violation,
    )


@dataclass(frozen=True)
class Histogram:
    """Normalized histogram: ``mass`` sums to one, ``density`` integrates to one."""

    edges: np.ndarray
    mass: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return self.mass / np.diff(self.edges)


def pooled_edges(*samples, bins: int = HISTOGRAM_BINS) -> np.ndarray:
    """Equal-width bin edges spanning the finite values of all samples."""
    values = np.concatenate([np.asarray(s, dtype=float) for s in samples])
    values = values[np.isfinite(values)]
    if values.size == 0:
        return np.linspace(0.0, 1.0, bins + 1)
    lo, hi = float(values.min()), float(values.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    return np.linspace(lo, hi, bins + 1)


def histogram(values, edges) -> Histogram:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    counts, _ = np.histogram(values, bins=edges)
    total = counts.sum()
    mass = counts / total if total else np.zeros(len(edges) - 1)
    return Histogram(np.asarray(edges, dtype=float), mass)


@dataclass
class ExperimentResult:
    config: TrialConfig
    reports: list
    histograms: dict

    @property
    def n_infeasible(self) -> int:
        return sum(not r.feasible for r in self.reports)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.reports], dtype=float)

    def summary(self) -> dict:
        out = {
            "target": self.config.target.id,
            "n_trials": len(self.reports),
            "n_infeasible": self.n_infeasible,
            "first_seed": self.reports[0].seed if self.reports else None,
            "n_constraint_points": self.config.n_constraint_points,
            "n_test_points": self.config.n_test_points,
            "cdf_factor": self.config.cdf_factor,
            "data_fit_eps": self.config.data_fit_eps,
            "total_restarts": int(sum(r.restarts_used for r in self.reports)),
            "medians": {},
        }
        for name in METRICS:
            col = self.column(name)
            col = col[np.isfinite(col)]
            out["medians"][name] = float(np.median(col)) if col.size else None
        return out


METRICS = (
    "rel_error_unconstrained",
    "rel_error_constrained",
    "violation_pct_unconstrained",
    "violation_pct_constrained",
)


def run_experiment(config: TrialConfig, n_trials: int, workers: int = 1) -> ExperimentResult:
    """Run trials with seeds ``config.seed .. config.seed + n_trials - 1``.

    With ``workers > 1`` trials run in separate processes; results are still
    collected in seed order, so output does not depend on scheduling.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    configs = [config.with_seed(config.seed + k) for k in range(n_trials)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(run_trial, configs))
    else:
        reports = []
        for cfg in configs:
            reports.append(run_trial(cfg))
            log.info("trial seed=%d done", cfg.seed)

    result = ExperimentResult(config, reports, {})
    for metric in ("rel_error", "violation_pct"):
        free = result.column(f"{metric}_unconstrained")
        cons = result.column(f"{metric}_constrained")
        edges = pooled_edges(free, cons)
        result.histograms[f"{metric}_unconstrained"] = histogram(free, edges)
        result.histograms[f"{metric}_constrained"] = histogram(cons, edges)
    return result
