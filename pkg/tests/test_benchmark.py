import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nonneg_gp.benchmark import (
    TARGETS,
    TrialConfig,
    eval_target,
    get_target,
    histogram,
    kdv_two_soliton,
    make_grids,
    make_training_set,
    pooled_edges,
    relative_l2_error,
    run_experiment,
    run_trial,
    violation_percentage,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_example2_center():
    assert eval_target(get_target("example2"), 0.5) == pytest.approx(0.01, abs=1e-15)


def test_example1_center():
    expected = 1 / (1 + 5**4) + 0.5
    assert eval_target(get_target("example1"), 0.5) == pytest.approx(expected, rel=1e-15)
    assert expected == pytest.approx(0.501597, abs=1e-6)


def test_kdv_origin():
    assert kdv_two_soliton(0.0, 0.0) == pytest.approx(12 * 8 / (8 * 16), rel=1e-15)
    assert kdv_two_soliton(0.0, 0.0) == pytest.approx(0.75)


def test_kdv_snapshot_positive_on_domain():
    target = get_target("kdv")
    x = np.linspace(*target.domain, 2001)
    assert np.all(target(x) > 0)
    np.testing.assert_allclose(target(x), kdv_two_soliton(x, -1.0), rtol=0)


def test_targets_positive():
    for target in TARGETS.values():
        x = np.linspace(*target.domain, 5001)
        assert np.all(target(x) > 0)


def test_target_aliases():
    assert get_target(1) is TARGETS["example1"]
    assert get_target("3") is TARGETS["kdv_soliton"]
    with pytest.raises(ValueError):
        get_target("example9")


@pytest.mark.parametrize(
    "name, n, anchors",
    [
        ("example1", 7, [0.0, 1.0, 0.5]),
        ("example2", 14, [0.0, 1.0, 0.075, 0.925]),
        ("kdv_soliton", 13, [-10.0, 5.0, -1.4, -8.4]),
    ],
)
@pytest.mark.parametrize("seed", [0, 1, 17, 12345])
def test_training_recipes(name, n, anchors, seed):
    target = get_target(name)
    training = make_training_set(target, seed)
    x = training.X[:, 0]
    assert training.n == n
    for a in anchors:
        assert a in x
    np.testing.assert_array_equal(training.y, target(x))


def test_training_jitter_statistics():
    # Interior jitter of the first example has standard deviation 0.03.
    target = get_target("example1")
    base = np.arange(6) / 5
    dev = np.concatenate([make_training_set(target, s).X[1:5, 0] - base[1:5] for s in range(500)])
    assert abs(dev.mean()) < 0.004
    assert dev.std() == pytest.approx(0.03, rel=0.05)


def test_training_set_deterministic():
    target = get_target("kdv")
    a = make_training_set(target, 5)
    b = make_training_set(target, 5)
    assert a.X.tobytes() == b.X.tobytes()
    assert not np.array_equal(a.X, make_training_set(target, 6).X)


def test_grids():
    cons, test = make_grids(TrialConfig(get_target("example1")))
    assert cons.size == 30 and test.size == 1000
    assert cons[0] == 0.0 and cons[-1] == 1.0
    np.testing.assert_allclose(np.diff(cons), 1 / 29, rtol=1e-12)
    np.testing.assert_allclose(np.diff(test), 1 / 999, rtol=1e-10)
    cons, _ = make_grids(TrialConfig(get_target("kdv"), n_constraint_points=2))
    np.testing.assert_array_equal(cons, [-10.0, 5.0])


def test_config_defaults_follow_target():
    assert TrialConfig(get_target(1)).n_constraint_points == 30
    assert TrialConfig(get_target(2)).n_constraint_points == 31
    assert TrialConfig(get_target(3)).n_constraint_points == 40
    assert TrialConfig(get_target(3)).jitter_std == 0.3
    with pytest.raises(ValueError):
        TrialConfig(get_target(1), n_test_points=1)


def test_relative_error_examples():
    t = np.array([0.3, -1.2, 2.0])
    assert relative_l2_error(t, t) == 0.0
    assert relative_l2_error(2 * t, t) == pytest.approx(1.0, abs=1e-12)
    assert relative_l2_error([1.0, 0.0], [1.0, 1.0]) == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert relative_l2_error([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.707107, abs=1e-6)
    with pytest.raises(ValueError):
        relative_l2_error([1.0], [0.0])


def test_violation_examples():
    assert violation_percentage([0.0, 1.0, 2.0]) == 0.0
    assert violation_percentage([-1.0, 1.0, -2.0, 3.0]) == 50.0
    assert violation_percentage([-1e-12, 1.0, 1.0, 1.0]) == 25.0
    with pytest.raises(ValueError):
        violation_percentage([])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=30), st.floats(0.01, 100))
def test_metric_scaling(pairs, scale):
    pred, truth = map(np.array, zip(*pairs))
    if np.sum(truth**2) < 1e-6:
        return
    e = relative_l2_error(pred, truth)
    assert e >= 0
    assert relative_l2_error(2 * pred, 2 * truth) == pytest.approx(e, rel=1e-12, abs=1e-15)
    assert violation_percentage(scale * pred) == violation_percentage(pred)
    assert 0 <= violation_percentage(pred) <= 100


@settings(max_examples=50, deadline=None)
@given(st.lists(finite, min_size=1, max_size=50), st.lists(finite, min_size=1, max_size=50))
def test_histogram_normalization(a, b):
    edges = pooled_edges(a, b)
    for sample in (a, b):
        h = histogram(sample, edges)
        assert abs(h.mass.sum() - 1.0) <= 1e-12
        assert abs(np.sum(h.density * np.diff(h.edges)) - 1.0) <= 1e-12


def test_histogram_ignores_nan():
    h = histogram([0.1, math.nan, 0.3], pooled_edges([0.1, 0.3]))
    assert h.mass.sum() == pytest.approx(1.0)


def test_single_trial_experiment():
    result = run_experiment(TrialConfig(get_target(1), seed=3), 1)
    assert len(result.reports) == 1
    for name, h in result.histograms.items():
        assert np.count_nonzero(h.mass) == 1, name
        assert h.mass.max() == 1.0


def test_trial_is_deterministic():
    config = TrialConfig(get_target(2), seed=11)
    a, b = run_trial(config), run_trial(config)
    assert a == b
    assert a.feasible
    assert 0 <= a.violation_pct_constrained <= 100 and a.rel_error_constrained >= 0
