"""Quasi-Newton and augmented-Lagrangian minimizers for small smooth problems.

Objectives here may be undefined on parts of the search space (a covariance
matrix that cannot be factorized). Callables signal that by returning
``inf`` for the value; line searches then backtrack instead of failing.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

log = logging.getLogger(__name__)

STATUS_MESSAGES = {
    0: "gradient below tolerance",
    1: "iteration limit reached",
    2: "line search could not decrease the objective",
    3: "relative objective change below tolerance",
}


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    status: int
    n_iter: int
    n_eval: int

    @property
    def converged(self) -> bool:
        return self.status in (0, 3)

    @property
    def message(self) -> str:
        return STATUS_MESSAGES[self.status]


def bfgs(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0,
    gtol: float = 1e-5,
    ftol: float = 1e-12,
    max_iter: int = 500,
    max_step: float = 2.0,
) -> MinimizeResult:
    """Minimize ``fun`` with BFGS and a backtracking Armijo line search.

    Parameters
    ----------
    fun : callable
        Returns ``(value, gradient)``. A non-finite value marks ``x`` as
        outside the domain; the gradient is then ignored.
    x0 : array_like
        Starting point. ``fun(x0)`` must be finite.
    gtol : float
        Stop when ``max(abs(gradient)) <= gtol``.
    ftol : float
        Stop after three consecutive steps whose relative decrease is below
        ``ftol``.
    max_step : float
        Cap on the Euclidean length of a single step.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    n_eval = 1
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    n = x.size
    H = np.eye(n)
    first = True
    small_steps = 0

    for it in range(max_iter):
        if np.max(np.abs(g)) <= gtol:
            return MinimizeResult(x, f, g, 0, it, n_eval)

        p = -H @ g
        slope = g @ p
        if slope >= 0:
            # Lost descent: fall back to steepest descent.
            H = np.eye(n)
            p = -g
            slope = g @ p
        norm_p = np.linalg.norm(p)
        if norm_p > max_step:
            p *= max_step / norm_p
            slope *= max_step / norm_p

        t = 1.0
        accepted = False
        for _ in range(60):
            x_new = x + t * p
            f_new, g_new = fun(x_new)
            n_eval += 1
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            return MinimizeResult(x, f, g, 2, it, n_eval)

        s = x_new - x
        yk = g_new - g
        sy = s @ yk
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yk):
            if first:
                H = np.eye(n) * (sy / (yk @ yk))
                first = False
            rho = 1.0 / sy
            V = np.eye(n) - rho * np.outer(s, yk)
            H = V @ H @ V.T + rho * np.outer(s, s)

        decrease = f - f_new
        x, f, g = x_new, f_new, g_new
        if decrease <= ftol * max(1.0, abs(f)):
            small_steps += 1
            if small_steps >= 3:
                return MinimizeResult(x, f, g, 3, it + 1, n_eval)
        else:
            small_steps = 0

    status = 0 if np.max(np.abs(g)) <= gtol else 1
    return MinimizeResult(x, f, g, status, max_iter, n_eval)


@dataclass
class AugLagResult:
    x: np.ndarray
    fun: float
    constraints: np.ndarray
    multipliers: np.ndarray
    max_violation: float
    n_outer: int
    n_eval: int
    history: list = field(default_factory=list)


def auglag(
    fun: Callable[[np.ndarray], tuple[float, np.ndarray]],
    constraints: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    x0,
    ctol: float = 1e-8,
    gtol: float = 1e-6,
    penalty: float = 100.0,
    penalty_growth: float = 10.0,
    max_penalty: float = 1e12,
    max_outer: int = 40,
    inner_max_iter: int = 300,
    stall_window: int = 5,
    weights: Callable[[np.ndarray], np.ndarray] | None = None,
) -> AugLagResult:
    """Minimize ``fun(x)`` subject to ``constraints(x) >= 0``.

    Powell-Hestenes-Rockafellar augmented Lagrangian for inequality
    constraints. Each outer iteration minimizes

        f(x) + sum_i psi(c_i(x); lambda_i, rho)

    with :func:`bfgs`, then sets ``lambda_i <- max(0, lambda_i - rho c_i)``.
    The penalty ``rho`` grows whenever the violation fails to shrink by a
    factor of four.

    Parameters
    ----------
    fun : callable
        Returns ``(value, gradient)``; ``inf`` marks an invalid point.
    constraints : callable
        Returns ``(c, J)`` with ``c`` of shape ``(k,)`` and Jacobian ``J`` of
        shape ``(k, n)``. Must be evaluable wherever ``fun`` is finite.
    ctol : float
        Target for the largest constraint violation.
    stall_window : int
        Give up once the penalty has reached ``max_penalty`` and the best
        violation has not improved by 10% over this many outer iterations.
    weights : callable, optional
        Positive per-constraint scale factors, re-evaluated at the start of
        each outer iteration and held fixed during the inner solve. The
        multipliers are carried over so that ``lambda * w`` is unchanged.
        ``ctol`` applies to the weighted constraints.
    """
    x = np.array(x0, dtype=float)
    f0, _ = fun(x)
    if not np.isfinite(f0):
        raise ValueError("objective is not finite at the starting point")
    c, _ = constraints(x)
    lam = np.zeros_like(c)
    w = np.ones_like(c) if weights is None else np.asarray(weights(x), dtype=float)
    rho = penalty
    n_eval = 1
    history = []

    def merit(z):
        f, g = fun(z)
        if not np.isfinite(f):
            return np.inf, None
        cz, J = constraints(z)
        shifted = np.maximum(0.0, lam - rho * w * cz)
        value = f + (shifted @ shifted - lam @ lam) / (2.0 * rho)
        return value, g - (w[:, None] * J).T @ shifted

    c = w * c
    violation = float(np.max(np.maximum(0.0, -c), initial=0.0))
    best_violation = [violation]
    n_outer = 0
    for n_outer in range(1, max_outer + 1):
        inner = bfgs(merit, x, gtol=gtol, max_iter=inner_max_iter)
        n_eval += inner.n_eval
        x = inner.x
        c, _ = constraints(x)
        c = w * c
        new_violation = float(np.max(np.maximum(0.0, -c), initial=0.0))
        complementarity = float(np.max(np.abs(np.minimum(lam, c)), initial=0.0))
        history.append((n_outer, rho, new_violation, inner.fun, inner.status))
        log.debug(
            "outer %d: rho=%.3g violation=%.3g merit=%.6g (%s)",
            n_outer, rho, new_violation, inner.fun, inner.message,
        )
        lam = np.maximum(0.0, lam - rho * c)
        if weights is not None:
            w_new = np.asarray(weights(x), dtype=float)
            lam = lam * w / w_new
            w = w_new
        best_violation.append(min(best_violation[-1], new_violation))
        if new_violation <= ctol and complementarity <= max(ctol, 1e-6):
            break
        if (
            rho >= max_penalty
            and len(best_violation) > stall_window
            and best_violation[-1] > 0.9 * best_violation[-1 - stall_window]
        ):
            log.debug("outer %d: violation stalled at %.3g", n_outer, new_violation)
            break
        if new_violation > 0.25 * violation and rho < max_penalty:
            rho = min(rho * penalty_growth, max_penalty)
        violation = new_violation

    f, _ = fun(x)
    c, _ = constraints(x)
    return AugLagResult(
        x=x,
        fun=float(f),
        constraints=c,
        multipliers=lam,
        max_violation=float(np.max(np.maximum(0.0, -c), initial=0.0)),
        n_outer=n_outer,
        n_eval=n_eval,
        history=history,
    )
