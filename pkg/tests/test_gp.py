import math

import numpy as np
import pytest

from nonneg_gp.errors import DimensionMismatchError, NotPositiveDefiniteError
from nonneg_gp.gp import (
    TrainingSet,
    fit,
    negative_log_likelihood,
    nll_and_gradient,
    nll_gradient,
    predict,
)
from nonneg_gp.kernel import Hyperparameters

from .oracles import dense_nll, dense_posterior, fd_gradient, random_instance


def test_scalar_fit():
    gp = fit(TrainingSet([[0.0]], [2.0]), Hyperparameters(0.0, 0.0, -800.0))
    np.testing.assert_allclose(gp.alpha, [2.0], rtol=1e-15)


def test_well_separated_pair():
    gp = fit(TrainingSet([[0.0], [10.0]], [1.0, -1.0]), Hyperparameters(0.0, 0.0, -800.0))
    K = np.array([[1.0, math.exp(-50.0)], [math.exp(-50.0), 1.0]])
    np.testing.assert_allclose(gp.alpha, np.linalg.solve(K, [1.0, -1.0]), rtol=1e-14)
    np.testing.assert_allclose(gp.alpha, [1.0, -1.0], atol=1e-20)


def test_duplicate_point_without_noise_is_singular():
    with pytest.raises(NotPositiveDefiniteError) as info:
        fit(TrainingSet([[0.3], [0.3]], [1.0, 1.0]), Hyperparameters(0.0, 0.0, -800.0))
    assert isinstance(info.value.theta, Hyperparameters)


def test_duplicate_point_with_noise_is_fine():
    gp = fit(TrainingSet([[0.3], [0.3]], [1.0, 1.2]), Hyperparameters(0.0, 0.0, -2.0))
    assert gp.predict([0.3]).mean == pytest.approx(1.1 * 2 / (2 + math.exp(-4)), rel=1e-12)


def test_training_set_validation():
    with pytest.raises(ValueError):
        TrainingSet([[0.0], [1.0]], [1.0])
    with pytest.raises(ValueError):
        TrainingSet(np.zeros((0, 1)), [])
    with pytest.raises(ValueError):
        TrainingSet([[0.0]], [math.inf])


def test_fitted_gp_is_read_only():
    gp = fit(TrainingSet([[0.0], [1.0]], [1.0, 2.0]), Hyperparameters(0.0, 0.0, -3.0))
    with pytest.raises(ValueError):
        gp.alpha[0] = 5.0
    with pytest.raises(AttributeError):
        gp.theta = None


def test_factor_and_solve_invariants():
    rng = np.random.default_rng(3)
    for _ in range(20):
        training, theta = random_instance(rng)
        gp = fit(training, theta)
        from nonneg_gp.kernel import covariance_matrix

        K = covariance_matrix(training.X, theta)
        L = gp.chol
        assert np.allclose(L, np.tril(L))
        assert np.linalg.norm(L @ L.T - K) <= 1e-8 * np.linalg.norm(K)
        assert np.linalg.norm(K @ gp.alpha - training.y) <= 1e-8 * np.linalg.norm(training.y)


def test_interpolation_without_noise():
    X = np.array([[0.0], [0.4], [1.1], [2.0]])
    y = np.array([0.5, -1.0, 2.0, 0.3])
    gp = fit(TrainingSet(X, y), Hyperparameters.from_natural(0.5, 1.3, 1e-300))
    for x, target in zip(X, y):
        p = gp.predict(x)
        assert abs(p.mean - target) <= 1e-6
        assert p.variance <= 1e-8


def test_prior_reversion_far_away():
    theta = Hyperparameters.from_natural(0.3, 1.7, 0.2)
    gp = fit(TrainingSet([[0.0], [0.5], [1.0]], [1.0, 2.0, -1.0]), theta)
    p = predict(gp, [40.0])
    assert abs(p.mean) <= 1e-8
    assert abs(p.variance - (1.7**2 + 0.2**2)) <= 1e-8


def test_predict_dimension_mismatch():
    gp = fit(TrainingSet(np.zeros((2, 2)) + [[0, 0], [1, 1]], [1.0, 2.0]), Hyperparameters(0, 0, -2))
    with pytest.raises(DimensionMismatchError):
        gp.predict([0.0])


def test_predict_matches_dense_oracle_small():
    rng = np.random.default_rng(11)
    X = rng.uniform(0, 1, size=(3, 1))
    y = rng.normal(size=3)
    theta = Hyperparameters.from_natural(0.4, 0.9, 0.05)
    gp = fit(TrainingSet(X, y), theta)
    for x_star in rng.uniform(-0.5, 1.5, size=(5, 1)):
        mean, var = dense_posterior(X, y, theta, x_star)
        p = gp.predict(x_star)
        assert p.mean == pytest.approx(mean, rel=1e-8, abs=1e-12)
        assert p.variance == pytest.approx(var, rel=1e-8, abs=1e-12)


def test_nll_single_zero_observation():
    theta = Hyperparameters.from_natural(0.7, 1.5, 0.3)
    expected = 0.5 * (math.log(1.5**2 + 0.3**2) + math.log(2 * math.pi))
    assert negative_log_likelihood(TrainingSet([[0.2]], [0.0]), theta) == pytest.approx(expected, rel=1e-14)


def test_nll_single_unit_observation():
    nll = negative_log_likelihood(TrainingSet([[0.0]], [1.0]), Hyperparameters(0.0, 0.0, -800.0))
    assert nll == pytest.approx(0.5 * (1.0 + math.log(2 * math.pi)), rel=1e-14)
    assert nll == pytest.approx(1.418939, abs=1e-6)


def test_nll_matches_dense_oracle():
    rng = np.random.default_rng(5)
    X = rng.uniform(0, 1, size=(4, 1))
    y = rng.normal(size=4)
    theta = Hyperparameters.from_natural(0.3, 1.1, 0.1)
    assert negative_log_likelihood(TrainingSet(X, y), theta) == pytest.approx(
        dense_nll(X, y, theta), rel=1e-8
    )


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(8)
    X = rng.uniform(0, 1, size=(4, 1))
    y = rng.normal(size=4)
    training = TrainingSet(X, y)
    theta = Hyperparameters(math.log(0.3), 0.2, math.log(0.1))
    np.testing.assert_allclose(nll_gradient(training, theta), fd_gradient(training, theta), rtol=1e-4)


def test_gradient_sign_for_oversized_signal():
    rng = np.random.default_rng(2)
    training = TrainingSet(rng.uniform(0, 1, size=(6, 1)), rng.normal(scale=0.1, size=6))
    theta = Hyperparameters(math.log(0.3), math.log(50.0), math.log(0.01))
    g = nll_gradient(training, theta)
    assert g[1] > 0
    assert fd_gradient(training, theta)[1] > 0


def test_determinism():
    rng = np.random.default_rng(0)
    training, theta = random_instance(rng)
    a = nll_and_gradient(training, theta)
    b = nll_and_gradient(training, theta)
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
    m1, v1 = fit(training, theta).predict_many(training.X + 0.1)
    m2, v2 = fit(training, theta).predict_many(training.X + 0.1)
    assert np.array_equal(m1, m2) and np.array_equal(v1, v2)


def test_variance_never_exceeds_prior():
    rng = np.random.default_rng(4)
    for _ in range(20):
        training, theta = random_instance(rng)
        _, var = fit(training, theta).predict_many(rng.uniform(-3, 3, size=(50, training.dim)))
        assert np.all(var <= theta.sigma**2 + theta.sigma_n**2 + 1e-10)
        assert np.all(var >= 0)
