import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hfsg.bench import (EXPERIMENTS, ExperimentResult, KNNRegressor, TreeRegressor, best_split,
                        count_inversions, knn_fit, knn_predict, r2_score, run_brand_experiment,
                        run_concurrency_experiment, run_experiment, run_separability_experiment, tree_fit,
                        tree_predict)
from hfsg.config import RunConfig
from hfsg.errors import ConfigError, UndefinedScoreError, ValidationError


def test_r2_cases():
    y = np.array([0.0, 1.0, 2.0])
    assert r2_score(y, y) == 1.0
    assert r2_score(y, np.full(3, y.mean())) == 0.0
    assert r2_score(y, np.array([0.0, 0.0, 2.0])) == 0.5
    with pytest.raises(UndefinedScoreError):
        r2_score(np.ones(3), np.zeros(3))


def test_r2_uniform_average_over_columns():
    t = np.array([[0.0, 1.0], [1.0, 3.0], [2.0, 5.0]])
    p = np.array([[0.0, 1.0], [0.0, 3.0], [2.0, 5.0]])
    assert r2_score(t, p) == pytest.approx((0.5 + 1.0) / 2)
    assert r2_score(np.column_stack([[0.0, 1.0], [2.0, 2.0]]), np.column_stack([[0.0, 1.0], [2.0, 2.0]])) == 1.0


def test_knn_k1_recovers_training_targets():
    rng = np.random.default_rng(0)
    x, y = rng.normal(size=(20, 3)), rng.normal(size=(20, 2))
    model = knn_fit(x, y, 1)
    np.testing.assert_array_equal(knn_predict(model, x), y)
    assert r2_score(y, knn_predict(model, x)) == 1.0


def test_knn_k_equals_n_gives_column_means():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(7, 2)), rng.normal(size=(7, 3))
    np.testing.assert_allclose(KNNRegressor(7).fit(x, y).predict(x[:2]), np.tile(y.mean(axis=0), (2, 1)))


def test_knn_matches_exhaustive_oracle():
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0], [3.0, 3.0], [-1.0, 1.0]])
    y = np.array([[1.0], [2.0], [3.0], [4.0], [5.0]])
    q = np.array([[0.2, 0.1], [2.0, 2.5]])
    model = KNNRegressor(2).fit(x, y)
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    zq = (q - x.mean(axis=0)) / x.std(axis=0)
    for i, row in enumerate(zq):
        d = [float(np.sum((row - r) ** 2)) for r in z]
        nearest = sorted(range(5), key=lambda j: (d[j], j))[:2]
        assert model.predict(q[i:i + 1])[0, 0] == pytest.approx(y[nearest, 0].mean())


def test_knn_tie_break_lowest_index():
    x = np.array([[1.0], [-1.0], [1.0], [-1.0]])
    model = KNNRegressor(1).fit(x, np.arange(4.0))
    assert model.neighbours(np.array([[0.0]]))[0, 0] == 0


def test_knn_errors():
    with pytest.raises(ConfigError):
        KNNRegressor(0)
    with pytest.raises(ValidationError):
        KNNRegressor(1).fit(np.zeros((0, 2)), np.zeros((0, 1)))
    with pytest.raises(ConfigError):
        KNNRegressor(3).fit(np.zeros((2, 2)), np.zeros((2, 1)))


def test_tree_depth_zero_is_global_mean():
    rng = np.random.default_rng(2)
    x, y = rng.normal(size=(30, 2)), rng.normal(size=(30, 2))
    tree = tree_fit(x, y, max_depth=0)
    np.testing.assert_allclose(tree_predict(tree, x), np.tile(y.mean(axis=0), (30, 1)))
    assert r2_score(y, tree_predict(tree, x)) == pytest.approx(0.0, abs=1e-12)


def test_tree_separable_depth_one():
    x = np.array([[0.0], [0.1], [0.2], [5.0], [5.1], [5.2]])
    y = np.array([[1.0, 0.0]] * 3 + [[0.0, 1.0]] * 3)
    tree = TreeRegressor(max_depth=1, min_leaf=1).fit(x, y)
    assert tree.depth() == 1
    assert r2_score(y, tree.predict(x)) == 1.0


def _exhaustive_split(x, y, min_leaf):
    best = None
    for f in range(x.shape[1]):
        values = sorted(set(x[:, f]))
        for lo, hi in zip(values, values[1:]):
            thr = 0.5 * (lo + hi)
            left = x[:, f] <= thr
            if left.sum() < min_leaf or (~left).sum() < min_leaf:
                continue
            sse = sum(float(np.sum((y[m] - y[m].mean(axis=0)) ** 2)) for m in (left, ~left))
            if best is None or sse < best[2] - 1e-12:
                best = (f, thr, sse)
    return best


def test_best_split_matches_exhaustive_oracle_8_rows():
    rng = np.random.default_rng(3)
    x = rng.integers(0, 6, size=(8, 3)).astype(float)
    y = rng.normal(size=(8, 2))
    f, thr, sse = best_split(x, y, 1)
    of, othr, osse = _exhaustive_split(x, y, 1)
    assert (f, thr) == (of, othr)
    assert sse == pytest.approx(osse, rel=1e-9)


def test_depth_two_tree_matches_recursive_oracle():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(8, 2))
    y = rng.normal(size=(8, 1))
    tree = TreeRegressor(max_depth=2, min_leaf=1).fit(x, y)
    f, thr, _ = _exhaustive_split(x, y, 1)
    assert (tree.root_.feature, tree.root_.threshold) == (f, thr)
    left = x[:, f] <= thr
    for child, mask in ((tree.root_.left, left), (tree.root_.right, ~left)):
        if mask.sum() >= 2:
            expect = _exhaustive_split(x[mask], y[mask], 1)
            if expect is not None:
                assert (child.feature, child.threshold) == expect[:2]


@given(st.integers(0, 10_000))
@settings(max_examples=15, deadline=None)
def test_tree_training_r2_non_decreasing_in_depth(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(40, 3)), rng.normal(size=(40, 2))
    scores = [r2_score(y, TreeRegressor(d, 1).fit(x, y).predict(x)) for d in range(6)]
    assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))


def test_split_threshold_between_adjacent_floats():
    # lo has an odd last mantissa bit, so the midpoint rounds up onto hi
    lo = np.nextafter(1.0, 2.0)
    hi = np.nextafter(lo, 2.0)
    x = np.array([[lo], [lo], [hi], [hi]])
    y = np.array([[0.0], [0.0], [1.0], [1.0]])
    f, thr, _ = best_split(x, y, 1)
    left = x[:, f] <= thr
    assert left.sum() == 2
    tree = TreeRegressor(3, 1).fit(x, y)
    np.testing.assert_array_equal(tree.predict(x), y)


def test_count_inversions():
    assert count_inversions([0.1, 0.5, 0.4, 0.9]) == 1
    assert count_inversions([0.9, 0.5, 0.6, 0.2], "decreasing") == 1
    assert count_inversions([1, 2, 3]) == 0


def test_experiment_result_table():
    res = ExperimentResult("k", [2, 4], [(2, "knn", 0, 0.5), (2, "knn", 1, 0.7), (4, "knn", 0, 0.1),
                                         (4, "knn", 1, 0.3), (4, "tree", 0, 0.0)])
    assert res.table("knn") == [0.6, 0.2]
    assert res.models() == ["knn", "tree"]


SMALL = RunConfig(n_samples=40, n_aggregate=60, latent_bound_min=0.0, latent_bound_max=1.0, tree_max_depth=3)


def test_separability_single_value_single_model(short_model):
    res = run_separability_experiment(SMALL, [1.0], short_model, models=("knn",))
    assert len(res.records) == 1 and res.records[0][:3] == (1.0, "knn", 0)
    assert res.records[0][3] <= 1


def test_experiments_deterministic(short_model):
    a = run_concurrency_experiment(SMALL, [2], short_model, seeds=(0, 1))
    b = run_concurrency_experiment(SMALL, [2], short_model, seeds=(0, 1))
    assert a.records == b.records


def test_experiment_errors(short_model):
    with pytest.raises(ConfigError):
        run_concurrency_experiment(SMALL, [], short_model)
    with pytest.raises(ConfigError):
        run_brand_experiment(SMALL.replace(brands_per_class=1), [0.5], short_model)
    with pytest.raises(ConfigError):
        run_separability_experiment(SMALL, [1.0], short_model, models=("xgb",))
    with pytest.raises(ConfigError):
        run_experiment("noise", SMALL, short_model)


def test_presets_are_valid_configs():
    for name, (preset, values) in EXPERIMENTS.items():
        RunConfig(**preset)
        assert len(values) >= 2
