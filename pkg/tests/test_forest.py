import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigtune import forest
from sigtune.errors import DimensionMismatch, NonFiniteCost, TooFewSamples


def test_constant_target():
    X = np.random.default_rng(0).random((10, 4))
    m = forest.fit(X, np.full(10, 100.0), seed=1)
    assert m.oob_error == 0.0
    assert np.all(m.predict(np.random.default_rng(1).random((5, 4))) == 100.0)
    imp = forest.gini_importance(m)
    assert imp.values.tolist() == [0.0] * 4


def test_linear_target_prediction():
    rng = np.random.default_rng(3)
    X = rng.random((50, 1))
    m = forest.fit(X, 10 * X[:, 0] + 1e-9, seed=0)
    assert 3 <= m.predict([0.5]) <= 7


def test_predicts_training_points_closely():
    rng = np.random.default_rng(4)
    X = rng.random((40, 3))
    y = 50 + 40 * X[:, 0] + 10 * X[:, 1]  # runtimes between 50 s and 100 s
    m = forest.fit(X, y, seed=2)
    assert np.all(np.abs(m.predict(X) - y) <= 0.2 * y)


def test_errors():
    with pytest.raises(TooFewSamples):
        forest.fit(np.zeros((3, 2)), np.ones(3))
    with pytest.raises(NonFiniteCost):
        forest.fit(np.zeros((5, 2)), [1, 2, np.nan, 3, 4])
    with pytest.raises(NonFiniteCost):
        forest.fit(np.zeros((5, 2)), [1, 2, -1, 3, 4])
    m = forest.fit(np.random.default_rng(0).random((6, 2)), np.arange(1.0, 7.0))
    with pytest.raises(DimensionMismatch):
        forest.predict(m, [0.1, 0.2, 0.3])


def test_dominant_feature():
    rng = np.random.default_rng(5)
    X = rng.random((100, 6))
    y = 1 + 10 * X[:, 0]
    # all features per split: the signal dim takes nearly all the gain
    full = forest.gini_importance(forest.fit(X, y, forest.ForestHyper(features_per_split=6), seed=0))
    assert full.values[0] >= 0.8
    # default ceil(d/3) candidates spread some gain onto noise dims, ranking is unchanged
    default = forest.gini_importance(forest.fit(X, y, seed=0))
    assert default.ranked()[0] == "x0"
    assert default.values[0] >= 4 * default.values[1:].max()


def test_symmetric_features():
    gaps = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        X = rng.random((100, 2))
        imp = forest.gini_importance(forest.fit(X, 1 + X[:, 0] + X[:, 1], seed=seed))
        gaps.append(abs(imp.values[0] - imp.values[1]))
    assert max(gaps) <= 0.2


@given(st.integers(0, 2**31 - 2), st.integers(4, 25), st.integers(1, 8))
def test_importance_simplex_and_determinism(seed, n, d):
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))
    y = 1 + rng.random(n)
    hyper = forest.ForestHyper(n_trees=8)
    a = forest.gini_importance(forest.fit(X, y, hyper, seed))
    b = forest.gini_importance(forest.fit(X, y, hyper, seed))
    assert np.array_equal(a.values, b.values)
    assert np.all(a.values >= 0)
    assert a.values.sum() == pytest.approx(1.0, abs=1e-9) or a.values.sum() == 0.0


def test_single_tree_matches_sklearn():
    """An unbagged, all-features tree reproduces sklearn's CART importances."""
    sk = pytest.importorskip("sklearn.tree")
    rng = np.random.default_rng(11)
    X = rng.random((60, 5))
    y = 3 + 4 * X[:, 1] + 2 * np.sin(6 * X[:, 3]) + 0.1 * rng.random(60)
    # leaves of >= 4 samples keep tiny nodes (where several dims give the same partition) out
    tree = forest._grow_tree(X, y, forest.ForestHyper(features_per_split=5, min_samples_leaf=4), seed=0)
    ours = np.zeros(5)
    np.add.at(ours, tree.feature[tree.feature >= 0], tree.gain[tree.feature >= 0])
    ref = sk.DecisionTreeRegressor(min_samples_leaf=4, random_state=0).fit(X, y)
    assert np.allclose(ours / ours.sum(), ref.feature_importances_, atol=1e-9)
    assert np.allclose(tree.predict(X), ref.predict(X))


def test_split_ties_go_to_lowest_dimension():
    X = np.array([[0.1, 0.1], [0.2, 0.2], [0.8, 0.8], [0.9, 0.9]])
    tree = forest._grow_tree(X, np.array([1.0, 1.0, 5.0, 5.0]), forest.ForestHyper(features_per_split=2), 0)
    assert tree.feature[0] == 0
    assert tree.threshold[0] == pytest.approx(0.5)
