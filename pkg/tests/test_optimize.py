import numpy as np
import pytest

from nonneg_gp.optimize import auglag, bfgs


def rosenbrock(x):
    f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
    g = np.array([
        -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2),
        200 * (x[1] - x[0] ** 2),
    ])
    return f, g


def test_bfgs_rosenbrock():
    res = bfgs(rosenbrock, [-1.2, 1.0], gtol=1e-8, max_iter=2000)
    assert res.converged
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-6)


def test_bfgs_backtracks_out_of_undefined_region():
    # log barrier at x = 0: the first full step lands in the undefined half.
    def fun(x):
        if x[0] <= 0:
            return np.inf, None
        return x[0] - np.log(x[0]), np.array([1 - 1 / x[0]])

    res = bfgs(fun, [5.0], max_step=10.0)
    assert res.x[0] == pytest.approx(1.0, abs=1e-5)


def test_bfgs_rejects_bad_start():
    with pytest.raises(ValueError):
        bfgs(lambda x: (np.inf, None), [0.0])


def test_auglag_active_linear_constraint():
    # min x^2 + y^2 s.t. x + y >= 1  ->  (0.5, 0.5), multiplier 1.
    fun = lambda x: (x @ x, 2 * x)
    cons = lambda x: (np.array([x[0] + x[1] - 1]), np.array([[1.0, 1.0]]))
    res = auglag(fun, cons, [3.0, -2.0])
    np.testing.assert_allclose(res.x, [0.5, 0.5], atol=1e-6)
    assert res.max_violation <= 1e-8
    assert res.multipliers[0] == pytest.approx(1.0, rel=1e-4)


def test_auglag_inactive_constraint_is_ignored():
    fun = lambda x: ((x[0] - 2) ** 2, np.array([2 * (x[0] - 2)]))
    cons = lambda x: (np.array([x[0] + 10]), np.array([[1.0]]))
    res = auglag(fun, cons, [0.0])
    assert res.x[0] == pytest.approx(2.0, abs=1e-6)
    assert res.multipliers[0] == 0.0


def test_auglag_nonlinear_circle():
    # min x + y s.t. 2 - x^2 - y^2 >= 0  ->  (-1, -1).
    fun = lambda x: (x.sum(), np.ones(2))
    cons = lambda x: (np.array([2 - x @ x]), -2 * x[None, :])
    res = auglag(fun, cons, [0.1, 0.3])
    np.testing.assert_allclose(res.x, [-1.0, -1.0], atol=1e-5)
