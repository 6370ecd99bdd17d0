"""Squared-exponential covariance with additive observation noise."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError


@dataclass(frozen=True)
class Hyperparameters:
    """Kernel hyperparameters held in log-space.

    The ordering ``(log_l, log_sigma, log_sigma_n)`` is the layout used for
    every parameter vector in the package (optimizer state, gradients,
    perturbations).
    """

    log_l: float
    log_sigma: float
    log_sigma_n: float

    def __post_init__(self):
        for name in ("log_l", "log_sigma", "log_sigma_n"):
            value = float(getattr(self, name))
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    @classmethod
    def from_natural(cls, l: float, sigma: float, sigma_n: float) -> "Hyperparameters":
        if min(l, sigma, sigma_n) <= 0:
            raise ValueError("l, sigma and sigma_n must all be positive")
        return cls(math.log(l), math.log(sigma), math.log(sigma_n))

    @classmethod
    def from_array(cls, values) -> "Hyperparameters":
        log_l, log_sigma, log_sigma_n = np.asarray(values, dtype=float).ravel()
        return cls(log_l, log_sigma, log_sigma_n)

    def to_array(self) -> np.ndarray:
        return np.array([self.log_l, self.log_sigma, self.log_sigma_n])

    @property
    def l(self) -> float:
        return math.exp(self.log_l)

    @property
    def sigma(self) -> float:
        return math.exp(self.log_sigma)

    @property
    def sigma_n(self) -> float:
        return math.exp(self.log_sigma_n)

    @property
    def signal_variance(self) -> float:
        return _finite(math.exp(2.0 * self.log_sigma), "signal variance")

    @property
    def noise_variance(self) -> float:
        return math.exp(2.0 * self.log_sigma_n)


def _finite(value: float, what: str) -> float:
    if not math.isfinite(value):
        raise OverflowError(f"{what} is not finite")
    return value


def as_points(X) -> np.ndarray:
    """Coerce ``X`` to a 2-D ``(n, d)`` float array.

    A 1-D input is read as ``n`` scalar locations (``d = 1``).
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X[:, None]
    elif X.ndim != 2:
        raise ValueError(f"points must be 1-D or 2-D, got shape {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("points need at least one coordinate")
    if not np.all(np.isfinite(X)):
        raise ValueError("point coordinates must be finite")
    return X


def _as_point(a) -> np.ndarray:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    if a.ndim != 1:
        raise ValueError(f"a single point must be 1-D, got shape {a.shape}")
    return a


def squared_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``A`` and ``B``."""
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(
            f"point dimensions differ: {A.shape[1]} vs {B.shape[1]}"
        )
    # Differences, not the |a|^2 + |b|^2 - 2ab expansion: keeps the result
    # exactly symmetric and exactly zero on coincident points.
    diff = A[:, None, :] - B[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_eval(a, b, theta: Hyperparameters, same_index: bool) -> float:
    """Evaluate the kernel between two points.

    ``same_index`` marks that ``a`` and ``b`` are the same observation, which
    is what switches on the noise term; coincident coordinates alone do not.
    """
    a, b = _as_point(a), _as_point(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"point dimensions differ: {a.size} vs {b.size}"
        )
    r2 = float(np.dot(a - b, a - b))
    value = theta.signal_variance * math.exp(-0.5 * r2 / theta.l**2)
    if same_index:
        value += theta.noise_variance
    return _finite(value, "kernel value")


def signal_covariance(A: np.ndarray, B: np.ndarray, theta: Hyperparameters) -> np.ndarray:
    """Noise-free block ``sigma^2 exp(-|a-b|^2 / 2l^2)`` for all row pairs."""
    r2 = squared_distances(A, B)
    return theta.signal_variance * np.exp(-0.5 * r2 / theta.l**2)


def covariance_matrix(X, theta: Hyperparameters) -> np.ndarray:
    """Training covariance ``K`` including the noise variance on the diagonal."""
    X = as_points(X)
    K = signal_covariance(X, X, theta)
    K[np.diag_indices_from(K)] += theta.noise_variance
    return K


def cross_covariance(X, x_star, theta: Hyperparameters) -> np.ndarray:
    """Covariance between the training inputs and one query point.

    Never carries the noise term, even when ``x_star`` coincides with a
    training location.
    """
    X = as_points(X)
    x_star = _as_point(x_star)[None, :]
    return signal_covariance(X, x_star, theta)[:, 0]
