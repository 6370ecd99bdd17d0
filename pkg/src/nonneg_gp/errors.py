"""Exception types shared across the package."""

import numpy as np


class DimensionMismatchError(ValueError):
    """Points of different dimension were combined."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """The covariance matrix could not be factorized at ``theta``.

    Optimizers catch this and treat ``theta`` as an invalid trial point.
    """

    def __init__(self, theta, message="covariance matrix is not positive definite"):
        super().__init__(f"{message} at {theta}")
        self.theta = theta


class NegativeVarianceError(NotPositiveDefiniteError):
    """Posterior variance came out negative beyond round-off."""


class NoFeasibleSolutionError(RuntimeError):
    """Every constrained solve, restarts included, ended infeasible.

    ``best`` is the least-violating :class:`~nonneg_gp.constrained.FitResult`
    seen, or ``None`` if no attempt produced an evaluable point.
    """

    def __init__(self, best, attempts):
        if best is None:
            msg = f"no feasible solution after {attempts} attempts"
        else:
            msg = (
                f"no feasible solution after {attempts} attempts; "
                f"least violation {best.max_violation:.3g} at {best.theta}"
            )
        super().__init__(msg)
        self.best = best
        self.attempts = attempts
