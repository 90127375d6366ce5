import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowtune.dataset import FlowDataset, SynthesisSpec, synthesize
from flowtune.learners import (
    LearnerError,
    LearnerSpec,
    TrainedModel,
    feature_importance,
    load_model,
    predict,
    predict_proba,
    save_model,
    train,
)
from flowtune.learners.ensemble import log_loss, softmax_grad_hess
from flowtune.learners.neighbors import pairwise_distance
from flowtune.learners.tree import fit_classification_tree, fit_regression_tree

ALL_SPECS = [
    LearnerSpec("cart"),
    LearnerSpec("cart", {"criterion": "entropy", "splitter": "random"}),
    LearnerSpec("rf", {"n_estimators": 50}),
    LearnerSpec("nb"),
    LearnerSpec("knn", {"n_neighbors": 7, "weights": "distance"}),
    LearnerSpec("knn", {"metric": "chebyshev"}),
    LearnerSpec("gbt", {"n_estimators": 20}),
    LearnerSpec("gbt", {"n_estimators": 20, "booster": "dart"}),
]


def numeric_loss(F, y):
    return log_loss(F[None, :], np.array([y]))


def test_cart_separable_depth_one(separable_1d):
    m = train(LearnerSpec("cart"), separable_1d)
    tree = m.model
    assert tree.depth == 1
    assert -1.0 < tree.threshold[0] <= 0.0
    assert (predict(m, separable_1d.features) == separable_1d.labels).all()


def test_gbt_gradient_at_zero():
    G, H = softmax_grad_hess(np.zeros((1, 3)), np.array([0]))
    assert np.allclose(G, [[1 / 3 - 1, 1 / 3, 1 / 3]])
    assert np.allclose(H, [[2 / 9] * 3])


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(100):
        L = int(rng.integers(2, 6))
        F = rng.normal(scale=2.0, size=L)
        y = int(rng.integers(L))
        G, H = softmax_grad_hess(F[None, :], np.array([y]))
        for k in range(L):
            e = np.zeros(L)
            e[k] = h
            up, mid, down = numeric_loss(F + e, y), numeric_loss(F, y), numeric_loss(F - e, y)
            g_num = (up - down) / (2 * h)
            h_num = (up - 2 * mid + down) / h**2
            assert abs(G[0, k] - g_num) <= 1e-4 * max(1.0, abs(g_num))
            assert abs(H[0, k] - h_num) <= 1e-4 * max(1.0, abs(h_num))


def test_rf_tree_count_and_columns(small_data):
    m = train(LearnerSpec("rf", {"n_estimators": 50}), small_data)
    assert len(m.model.trees) == 50
    n_cols = math.floor(math.log2(small_data.n_features))
    assert all(len(c) == n_cols for c in m.model.meta["column_subsets"])
    for tree, cols in zip(m.model.trees, m.model.meta["column_subsets"]):
        used = set(tree.feature[tree.feature >= 0].tolist())
        assert used <= set(cols)
        assert tree.n_samples[0] == small_data.n_rows


def test_gbt_tree_count(small_data):
    m = train(LearnerSpec("gbt", {"n_estimators": 7}), small_data)
    assert len(m.model.trees) == 7 * small_data.n_classes


def test_knn_tie_goes_to_lowest_class():
    data = FlowDataset([[0.0], [1.0]], [0, 1], ("x",), ("a", "b"))
    m = train(LearnerSpec("knn", {"n_neighbors": 2}), data)
    assert predict(m, [[0.1]]).tolist() == [0]


def test_chebyshev_distance():
    assert pairwise_distance(np.array([[0.0, 0.0]]), np.array([[1.0, 3.0]]), "chebyshev")[0, 0] == 3.0


def test_minkowski_distance_matches_formula():
    rng = np.random.default_rng(1)
    A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
    for p in (1.0, 2.0, 3.5):
        expected = np.array([[np.sum(np.abs(a - b) ** p) ** (1 / p) for b in B] for a in A])
        assert np.allclose(pairwise_distance(A, B, "minkowski", p), expected)


def test_gbt_fits_separable(separable_1d):
    m = train(LearnerSpec("gbt"), separable_1d)
    assert (predict(m, separable_1d.features) == separable_1d.labels).mean() >= 0.99


def test_gbt_learning_rate_must_be_positive():
    with pytest.raises(LearnerError):
        LearnerSpec("gbt", {"learning_rate": 0.0})


@pytest.mark.parametrize(
    "kind,params",
    [
        ("rf", {"n_estimators": 10}),
        ("knn", {"n_neighbors": 1}),
        ("knn", {"p": 20}),
        ("nb", {"alpha": 0.5}),
        ("cart", {"min_samples_split": 1.5}),
        ("cart", {"criterion": "mse"}),
        ("svm", {}),
    ],
)
def test_param_ranges(kind, params):
    with pytest.raises(LearnerError):
        LearnerSpec(kind, params)


def test_importance_single_split_on_feature_three():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 5))
    y = (X[:, 3] > 0).astype(int)
    m = train(LearnerSpec("cart"), FlowDataset(X, y, tuple("abcde"), ("n", "l")))
    assert m.model.depth == 1
    ranking = dict(feature_importance(m))
    assert ranking["d"] == 1.0
    assert sum(v for k, v in ranking.items() if k != "d") == 0.0


def test_rf_importance_sums_to_one(small_data):
    ranking = feature_importance(train(LearnerSpec("rf", {"n_estimators": 50}), small_data, seed=2))
    assert abs(sum(v for _, v in ranking) - 1.0) < 1e-9
    values = [v for _, v in ranking]
    assert values == sorted(values, reverse=True)


def test_importance_rejects_non_tree(small_data):
    with pytest.raises(LearnerError):
        feature_importance(train(LearnerSpec("nb"), small_data))


def test_signal_columns_rank_top_three():
    for seed in range(5):
        data = synthesize(SynthesisSpec(n_per_class=(100,) * 4, signal_columns=(0, 1), seed=seed))
        top = [name for name, _ in feature_importance(train(LearnerSpec("gbt"), data, seed=seed))[:3]]
        assert data.feature_names[0] in top and data.feature_names[1] in top


def test_boosting_loss_non_increasing(small_data):
    m = train(LearnerSpec("gbt", {"n_estimators": 40}), small_data)
    losses = np.array(m.model.meta["train_loss"])
    assert np.all(np.diff(losses) <= 1e-12)


def test_cart_purity_on_duplicate_free_data():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(120, 3))
    y = rng.integers(0, 3, 120)
    tree = fit_classification_tree(X, y, 3)
    leaves = tree.feature < 0
    assert np.all(np.max(tree.value[leaves], axis=1) == 1.0)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-{len(s.params)}")
def test_determinism_and_probabilities(spec, small_data):
    a, b = train(spec, small_data, seed=11), train(spec, small_data, seed=11)
    X = small_data.features
    assert np.array_equal(predict(a, X), predict(b, X))
    P = predict_proba(a, X)
    assert np.allclose(P.sum(axis=1), 1.0, atol=1e-9)


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind}-{len(s.params)}")
def test_save_load_round_trip(spec, small_data, tmp_path):
    m = train(spec, small_data, seed=1)
    save_model(m, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    assert isinstance(back, TrainedModel)
    assert np.array_equal(predict_proba(back, small_data.features), predict_proba(m, small_data.features))


def test_column_mismatch(small_data):
    m = train(LearnerSpec("cart"), small_data)
    with pytest.raises(ValueError, match="columns"):
        predict(m, np.zeros((2, 3)))


def test_nb_handles_negative_inputs_and_absent_class():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 2)) - 5
    y = np.array([0] * 15 + [1] * 15)
    data = FlowDataset(X, y, ("a", "b"), ("n", "l", "d"))
    P = predict_proba(train(LearnerSpec("nb"), data), X - 10)
    assert np.all(np.isfinite(P)) and np.allclose(P.sum(axis=1), 1.0)
    assert np.all(P[:, 2] > 0)


def test_knn_distance_weights_exact_match_wins():
    data = FlowDataset([[0.0], [1.0], [1.1]], [0, 1, 1], ("x",), ("a", "b"))
    m = train(LearnerSpec("knn", {"n_neighbors": 3, "weights": "distance"}), data)
    assert predict_proba(m, [[0.0]]).tolist() == [[1.0, 0.0]]


def test_min_samples_split_fraction_limits_growth(small_data):
    shallow = train(LearnerSpec("cart", {"min_samples_split": 0.9}), small_data)
    deep = train(LearnerSpec("cart", {"min_samples_split": 0.0}), small_data)
    assert shallow.model.n_nodes < deep.model.n_nodes


def test_regression_tree_leaves_are_means():
    X = np.arange(20, dtype=float)[:, None]
    y = np.where(X[:, 0] < 10, 1.0, 5.0)
    tree = fit_regression_tree(X, y, max_depth=1, min_leaf=4)
    assert sorted(np.unique(tree.predict_value(X)).tolist()) == [1.0, 5.0]


@given(st.integers(0, 1000))
def test_regression_tree_min_leaf(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2))
    tree = fit_regression_tree(X, rng.normal(size=40), max_depth=8, min_leaf=4)
    leaves = tree.feature < 0
    assert tree.n_samples[leaves].min() >= 4
    assert tree.depth <= 8


def test_dart_records_drops(small_data):
    m = train(LearnerSpec("gbt", {"n_estimators": 30, "booster": "dart"}), small_data, seed=3)
    dropped = m.model.meta["dropped"]
    assert any(dropped) and all(j < i for i, d in enumerate(dropped) for j in d)
