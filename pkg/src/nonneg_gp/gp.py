"""Posterior prediction and marginal likelihood for a zero-mean GP."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DimensionMismatchError, NegativeVarianceError, NotPositiveDefiniteError
from .kernel import (
    Hyperparameters,
    as_points,
    covariance_matrix,
    signal_covariance,
    squared_distances,
)

LOG_2PI = math.log(2.0 * math.pi)

# Relative round-off allowance for negative posterior variances.
VARIANCE_ROUNDOFF = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TrainingSet:
    """Observation locations ``X`` (shape ``(N, d)``) and values ``y``."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = as_points(self.X)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] < 1:
            raise ValueError("training set needs at least one point")
        if X.shape[0] != y.size:
            raise ValueError(f"{X.shape[0]} locations but {y.size} observations")
        if not np.all(np.isfinite(y)):
            raise ValueError("observations must be finite")
        object.__setattr__(self, "X", _frozen(X))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class PosteriorPrediction:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)


def prior_variance(theta: Hyperparameters) -> float:
    """Prior variance of the process at a query point.

    Includes the noise variance, so predictions describe a fresh noisy
    observation. Drop the second term to predict the latent function instead.
    """
    return theta.signal_variance + theta.noise_variance


def _cholesky(K: np.ndarray, theta: Hyperparameters) -> np.ndarray:
    try:
        L = np.linalg.cholesky(K)
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(theta) from None
    if not np.all(np.isfinite(L)):
        raise NotPositiveDefiniteError(theta)
    return L


@dataclass(frozen=True)
class FittedGP:
    """A training set conditioned on fixed hyperparameters.

    Build with :func:`fit`. Holds the lower Cholesky factor ``chol`` of the
    training covariance and ``alpha = K^{-1} y``.
    """

    training: TrainingSet
    theta: Hyperparameters
    chol: np.ndarray
    alpha: np.ndarray

    def predict_many(self, X_star) -> tuple[np.ndarray, np.ndarray]:
        """Posterior means and variances at each row of ``X_star``."""
        X_star = as_points(X_star)
        if X_star.shape[1] != self.training.dim:
            raise DimensionMismatchError(
                f"query dimension {X_star.shape[1]} != training dimension {self.training.dim}"
            )
        Ks = signal_covariance(self.training.X, X_star, self.theta)
        mean = Ks.T @ self.alpha
        V = solve_triangular(self.chol, Ks, lower=True)
        prior = prior_variance(self.theta)
        var = prior - np.einsum("ij,ij->j", V, V)
        floor = -VARIANCE_ROUNDOFF * prior
        if np.any(var < floor):
            raise NegativeVarianceError(
                self.theta, f"posterior variance {var.min():.3g} below round-off floor"
            )
        return mean, np.maximum(var, 0.0)

    def predict(self, x_star) -> PosteriorPrediction:
        x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
        if x_star.ndim != 1:
            raise ValueError("predict takes a single point; use predict_many")
        mean, var = self.predict_many(x_star[None, :])
        return PosteriorPrediction(float(mean[0]), float(var[0]))

    def negative_log_likelihood(self) -> float:
        y = self.training.y
        log_det = 2.0 * np.sum(np.log(np.diag(self.chol)))
        return float(0.5 * (y @ self.alpha + log_det + y.size * LOG_2PI))


def fit(training: TrainingSet, theta: Hyperparameters) -> FittedGP:
    """Factorize the training covariance at ``theta``.

    Raises
    ------
    NotPositiveDefiniteError
        If ``K`` is not numerically positive definite. No jitter is added.
    """
    K = covariance_matrix(training.X, theta)
    L = _cholesky(K, theta)
    alpha = cho_solve((L, True), training.y)
    return FittedGP(training, theta, _frozen(L), _frozen(alpha))


def predict(gp: FittedGP, x_star) -> PosteriorPrediction:
    return gp.predict(x_star)


def negative_log_likelihood(training: TrainingSet, theta: Hyperparameters) -> float:
    return fit(training, theta).negative_log_likelihood()


def nll_and_gradient(training: TrainingSet, theta: Hyperparameters) -> tuple[float, np.ndarray]:
    """NLL and its gradient with respect to ``(log_l, log_sigma, log_sigma_n)``.

    Uses ``dNLL/dp = 0.5 tr[(K^{-1} - alpha alpha^T) dK/dp]``.
    """
    gp = fit(training, theta)
    X = training.X
    n = training.n
    K_inv = cho_solve((gp.chol, True), np.eye(n))
    W = K_inv - np.outer(gp.alpha, gp.alpha)

    r2 = squared_distances(X, X)
    K_sig = theta.signal_variance * np.exp(-0.5 * r2 / theta.l**2)
    dK_log_l = K_sig * (r2 / theta.l**2)
    dK_log_sigma = 2.0 * K_sig

    grad = np.array([
        0.5 * np.sum(W * dK_log_l),
        0.5 * np.sum(W * dK_log_sigma),
        theta.noise_variance * np.trace(W),
    ])
    return gp.negative_log_likelihood(), grad


def nll_gradient(training: TrainingSet, theta: Hyperparameters) -> np.ndarray:
    return nll_and_gradient(training, theta)[1]
