import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flowtune import preprocess as pp
from flowtune.dataset import FlowDataset
from flowtune.preprocess import PreprocessError, PreprocessorSpec


def ds(X, y=None, classes=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.zeros(len(X), int) if y is None else np.asarray(y)
    n_cls = int(y.max()) + 1 if classes is None else classes
    return FlowDataset(X, y, tuple(f"f{i}" for i in range(X.shape[1])), tuple(f"c{i}" for i in range(n_cls)))


def fitted(kind, X, **params):
    return pp.fit(PreprocessorSpec(kind, params), ds(X))


def test_standard_scaler_two_points():
    t = fitted("standard_scaler", [[1.0], [3.0]])
    assert t.state["mean"].tolist() == [2.0]
    assert t.state["scale"].tolist() == [1.0]


def test_robust_scaler_percentiles():
    t = fitted("robust_scaler", np.arange(1, 101), quantile_range=(25, 75))
    # linear interpolation between closest ranks, by hand:
    # 25th at position 0.25 * 99 = 24.75 -> 25.75; 75th at 74.25 -> 75.25
    assert t.state["center"][0] == pytest.approx(50.5)
    assert t.state["scale"][0] == pytest.approx(75.25 - 25.75)


def test_minmax_midpoint():
    t = fitted("minmax_scaler", [0.0, 10.0])
    assert pp.transform_matrix(t, [[5.0]]).tolist() == [[0.5]]


def test_normalizer_l2():
    t = fitted("normalizer", [[3.0, 4.0]], norm="l2")
    assert np.allclose(pp.transform_matrix(t, [[3.0, 4.0]]), [[0.6, 0.8]])


@pytest.mark.parametrize("norm,expected", [("l1", [3 / 7, 4 / 7]), ("max", [0.75, 1.0])])
def test_normalizer_other_norms(norm, expected):
    t = fitted("normalizer", [[3.0, 4.0]], norm=norm)
    assert np.allclose(pp.transform_matrix(t, [[3.0, 4.0]]), [expected])


def test_maxabs_divides_by_max_abs():
    t = fitted("maxabs_scaler", [[-4.0, 1.0], [2.0, -0.5]])
    assert np.allclose(pp.transform_matrix(t, [[-4.0, 1.0]]), [[-1.0, 1.0]])


def test_quantile_uniform_matches_rank_oracle():
    rng = np.random.default_rng(0)
    x = rng.normal(size=500)
    t = fitted("quantile_transformer", x, n_quantiles=1000, output_distribution="uniform")
    out = pp.transform_matrix(t, x[:, None])[:, 0]
    rank = np.argsort(np.argsort(x)) / (len(x) - 1)
    assert np.abs(out - rank).max() < 2 / len(x)


def test_quantile_subsample_without_replacement():
    rng = np.random.default_rng(1)
    x = rng.normal(size=1500)
    spec = PreprocessorSpec("quantile_transformer", {"subsample": 1000, "n_quantiles": 100})
    a, b = pp.fit(spec, ds(x), seed=3), pp.fit(spec, ds(x), seed=3)
    assert np.array_equal(a.state["quantiles"], b.state["quantiles"])
    assert not np.array_equal(a.state["quantiles"], pp.fit(spec, ds(x), seed=4).state["quantiles"])


def test_quantile_normal_output_is_finite_and_monotone():
    x = np.linspace(-3, 3, 200)
    t = fitted("quantile_transformer", x, n_quantiles=100, output_distribution="normal")
    out = pp.transform_matrix(t, np.linspace(-10, 10, 400)[:, None])[:, 0]
    assert np.all(np.isfinite(out)) and np.all(np.diff(out) >= 0)


def test_kernel_centerer_centres_the_gram_matrix():
    rng = np.random.default_rng(2)
    X, Z = rng.normal(size=(30, 4)), rng.normal(size=(7, 4))
    t = fitted("kernel_centerer", X)
    n = len(X)
    K = X @ X.T
    H = np.eye(n) - np.ones((n, n)) / n
    fit_side = pp.transform_matrix(t, X)
    assert np.allclose(fit_side @ fit_side.T, H @ K @ H)
    # out-of-sample: standard double centring with fit-time kernel means
    Kz = Z @ X.T
    expected = Kz - Kz.mean(axis=1, keepdims=True) - K.mean(axis=0)[None, :] + K.mean()
    assert np.allclose(pp.transform_matrix(t, Z) @ fit_side.T, expected)


@given(arrays(np.float64, (6, 3), elements=st.floats(-200, 200)), st.floats(0, 100))
def test_binarizer_image(X, threshold):
    t = fitted("binarizer", X, threshold=threshold)
    assert set(np.unique(pp.transform_matrix(t, X))) <= {0.0, 1.0}


@pytest.mark.parametrize("kind", pp.INVERTIBLE)
@given(X=arrays(np.float64, (8, 3), elements=st.floats(-1e4, 1e4)))
def test_invertible_round_trip(kind, X):
    t = fitted(kind, X)
    back = pp.inverse(t, pp.transform_matrix(t, X))
    assert np.allclose(back, X, rtol=1e-9, atol=1e-9 * (1 + np.abs(X).max()))


@pytest.mark.parametrize("kind", pp.INVERTIBLE)
def test_subnormal_spread_is_treated_as_constant(kind):
    X = np.zeros((8, 3))
    X[0, 0], X[1, 0] = -1.06804053e-306, -49.0
    out = pp.transform_matrix(fitted(kind, X), X)
    assert np.isfinite(out).all()


def test_zero_variance_column_is_centred_not_divided_by_zero():
    t = fitted("standard_scaler", [[5.0, 1.0], [5.0, 2.0]])
    out = pp.transform_matrix(t, [[5.0, 1.0]])
    assert out[0, 0] == 0.0 and np.isfinite(out).all()


def test_no_leakage_from_test_rows():
    rng = np.random.default_rng(3)
    tune = ds(rng.normal(size=(40, 3)))
    test = rng.normal(size=(10, 3))
    for kind in ("standard_scaler", "robust_scaler", "quantile_transformer", "minmax_scaler"):
        spec = PreprocessorSpec(kind, {"n_quantiles": 100} if kind == "quantile_transformer" else {})
        before = pp.fit(spec, tune)
        pp.transform_matrix(before, test)
        test[:] = 1e9
        after = pp.fit(spec, tune)
        for key in before.state:
            assert np.array_equal(before.state[key], after.state[key])


def test_apply_keeps_labels_and_rows(small_data):
    t = pp.fit(PreprocessorSpec("standard_scaler"), small_data)
    out = pp.apply(t, small_data)
    assert np.array_equal(out.labels, small_data.labels)
    assert out.n_rows == small_data.n_rows
    assert np.allclose(out.features.mean(axis=0), 0) and np.allclose(out.features.std(axis=0), 1)


def test_column_mismatch():
    t = fitted("standard_scaler", [[1.0, 2.0]])
    with pytest.raises(PreprocessError, match="columns"):
        pp.transform_matrix(t, [[1.0, 2.0, 3.0]])


@pytest.mark.parametrize(
    "kind,params",
    [
        ("binarizer", {"threshold": 101}),
        ("robust_scaler", {"quantile_range": (10, 50)}),
        ("quantile_transformer", {"n_quantiles": 50}),
        ("smote", {"n_synthetics": 75}),
        ("smote", {"minkowski_exponent": 6}),
        ("normalizer", {"norm": "l3"}),
        ("pca", {}),
    ],
)
def test_out_of_range_params(kind, params):
    with pytest.raises(PreprocessError):
        PreprocessorSpec(kind, params)


def test_spec_json_round_trip():
    spec = PreprocessorSpec("robust_scaler", {"quantile_range": [10, 90]})
    assert PreprocessorSpec.from_dict(spec.to_dict()) == spec


# -- SMOTE -------------------------------------------------------------------


def test_smote_error_names_the_class():
    y = np.array([0] * 10 + [1] * 10 + [2] * 3)
    data = ds(np.random.default_rng(0).normal(size=(23, 2)), y)
    with pytest.raises(PreprocessError, match="class 2"):
        pp.fit(PreprocessorSpec("smote", {"n_neighbors": 5}), data)


def test_smote_on_a_segment_stays_on_it():
    X = np.array([[5.0, 5.0]] * 3 + [[6.0, 6.0]] * 2 + [[0.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 0, 0, 0, 0, 1, 1])
    out = pp.oversample(PreprocessorSpec("smote", {"n_neighbors": 1, "n_synthetics": 50}), ds(X, y), seed=0)
    new = out.features[len(X):]
    assert len(new) == 48
    assert np.array_equal(new[:, 0], new[:, 1])
    assert new.min() >= 0.0 and new.max() <= 1.0


def test_minkowski_nearest_neighbor():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [3.0, 4.0]])
    assert pp.nearest_neighbors(X, 1, 2.0)[0, 0] == 1


def test_smote_reaches_target_and_never_shrinks():
    rng = np.random.default_rng(0)
    y = np.array([0] * 150 + [1] * 40 + [2] * 120)
    data = ds(rng.normal(size=(len(y), 3)), y)
    out = pp.oversample(PreprocessorSpec("smote", {"n_synthetics": 100}), data, seed=1)
    assert out.class_counts().tolist() == [150, 100, 120]
    assert np.array_equal(out.features[: len(y)], data.features)


def test_smote_deterministic():
    rng = np.random.default_rng(0)
    y = np.array([0] * 30 + [1] * 10)
    data = ds(rng.normal(size=(40, 2)), y)
    spec = PreprocessorSpec("smote", {"n_synthetics": 50})
    assert pp.oversample(spec, data, seed=5) == pp.oversample(spec, data, seed=5)
