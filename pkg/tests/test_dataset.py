import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowtune.dataset import (
    DataError,
    FlowDataset,
    SynthesisSpec,
    class_signatures,
    holdout_split,
    kfold_splits,
    load_csv,
    planted_spec,
    synthesize,
)
from flowtune.learners import LearnerSpec, predict, train
from flowtune.metrics import score


def write(tmp_path, text, name="f.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_row_csv(tmp_path):
    p = write(tmp_path, "c_bytes_all,c_pkts_retx,label\n10,1,normal\n20,5,loss\n30,7,loss\n")
    d = load_csv(p)
    assert d.n_classes == 2
    assert d.labels.tolist() == [0, 1, 1]
    assert d.feature_names == ("c_bytes_all", "c_pkts_retx")


def test_normal_is_class_zero_even_when_not_first(tmp_path):
    p = write(tmp_path, "a,label\n1,loss\n2,normal\n3,duplicate\n")
    d = load_csv(p)
    assert d.class_names == ("normal", "loss", "duplicate")
    assert d.labels.tolist() == [1, 0, 2]


def test_empty_cell_imputed_with_column_median(tmp_path):
    p = write(tmp_path, "c_rtt_avg,x,label\n1.0,0,normal\n,0,loss\n4.0,0,loss\n10.0,0,normal\n")
    d = load_csv(p)
    # median of the other values 1, 4, 10 by hand
    assert d.features[1, 0] == 4.0


@pytest.mark.parametrize(
    "text,message",
    [
        ("1,2,3\n4,5,6\n", "missing header"),
        ("a,b\n1,2\n", "missing label column"),
        ("a,label\nfoo,normal\nbar,loss\n", "entirely non-numeric"),
    ],
)
def test_load_errors(tmp_path, text, message):
    with pytest.raises(DataError, match=message):
        load_csv(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_csv(tmp_path / "nope.csv")


def test_unknown_label_with_class_map(tmp_path):
    p = write(tmp_path, "a,label\n1,normal\n2,weird\n")
    with pytest.raises(DataError, match="unknown label"):
        load_csv(p, class_map={"normal": 0, "loss": 1})


@given(st.lists(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=2), min_size=1, max_size=20))
def test_imputation_idempotence(tmp_path_factory, rows):
    # A file without empty cells parses to exactly the written values.
    p = tmp_path_factory.mktemp("csv") / "d.csv"
    lines = ["a,b,label"] + [f"{r[0]!r},{r[1]!r},normal" for r in rows]
    p.write_text("\n".join(lines) + "\n")
    d = load_csv(p)
    assert np.array_equal(d.features, np.array(rows))


def test_csv_round_trip(tmp_path, small_data):
    p = tmp_path / "d.csv"
    small_data.to_csv(p)
    assert load_csv(p, class_map={n: i for i, n in enumerate(small_data.class_names)}) == small_data


def test_synthesize_deterministic_and_balanced():
    spec = SynthesisSpec(n_per_class=(500, 500, 500, 500), seed=1)
    a, b = synthesize(spec), synthesize(spec)
    assert a == b
    assert a.n_rows == 2000
    assert a.class_counts().tolist() == [500] * 4


def test_synthesis_spec_json_round_trip():
    spec = planted_spec(4)
    assert SynthesisSpec.from_json(spec.to_json()) == spec


@pytest.mark.parametrize(
    "kwargs",
    [dict(n_per_class=()), dict(n_per_class=(0, 5), class_shift=(0, 1)), dict(noise_sd=0.0), dict(n_features=1)],
)
def test_synthesis_validation(kwargs):
    with pytest.raises(DataError):
        SynthesisSpec(**kwargs)


def test_signatures_are_distinct():
    sig = class_signatures(4, 3)
    assert len({tuple(r) for r in sig}) == 4
    assert not sig[0].any()


def _heldout_recall(shift, seed):
    spec = SynthesisSpec(n_per_class=(150,) * 4, class_shift=(0.0, shift, shift, shift), seed=seed)
    data = synthesize(spec)
    keep, held = holdout_split(data.labels, 0.25, seed)
    model = train(LearnerSpec("cart"), data.subset(keep), seed=0)
    return score(data.labels[held], predict(model, data.features[held]), 4).recall


def test_zero_shift_is_chance_level():
    for seed in range(10):
        assert abs(_heldout_recall(0.0, seed) - 0.25) <= 0.1


def test_synthesis_monotonicity():
    medians = [np.median([_heldout_recall(s, seed) for seed in range(10)]) for s in (0.5, 1.5, 3.0)]
    assert medians[0] <= medians[1] <= medians[2]


def test_planted_dataset_shape():
    d = synthesize(planted_spec(0))
    assert d.n_rows == 2000 and d.n_classes == 4 and d.n_features == 10


def _toy(n):
    labels = np.arange(n) % 2
    return FlowDataset(np.arange(n, dtype=float)[:, None], labels, ("x",), ("normal", "loss"))


def test_kfold_arithmetic():
    splits = kfold_splits(_toy(100), k=10, seed=0)
    assert len(splits) == 10
    for s in splits:
        assert len(s.test_idx) == 10
        assert len(s.tune_idx) == 72
        assert len(s.validation_idx) == 18
    union = np.sort(np.concatenate([s.test_idx for s in splits]))
    assert union.tolist() == list(range(100))


def test_kfold_deterministic():
    a, b = kfold_splits(_toy(60), 5, seed=7), kfold_splits(_toy(60), 5, seed=7)
    for x, y in zip(a, b):
        assert np.array_equal(x.test_idx, y.test_idx) and np.array_equal(x.tune_idx, y.tune_idx)


def test_kfold_errors():
    with pytest.raises(DataError):
        kfold_splits(_toy(5), k=6)
    with pytest.raises(DataError):
        kfold_splits(_toy(5), k=1)


@given(st.integers(12, 200), st.integers(2, 10), st.integers(0, 2**31))
def test_partition_property(n, k, seed):
    data = _toy(n)
    splits = kfold_splits(data, k, seed)
    tests = np.concatenate([s.test_idx for s in splits])
    assert np.array_equal(np.sort(tests), np.arange(n))
    for s in splits:
        parts = np.concatenate([s.tune_idx, s.validation_idx, s.test_idx])
        assert np.array_equal(np.sort(parts), np.arange(n))
        assert np.array_equal(s.train_idx, np.setdiff1d(np.arange(n), s.test_idx))


def test_stratified_folds_keep_every_class():
    data = synthesize(SynthesisSpec(n_per_class=(20, 20, 20, 20)))
    for s in kfold_splits(data, 10, 0):
        for part in (s.tune_idx, s.validation_idx, s.test_idx):
            assert set(data.labels[part]) == {0, 1, 2, 3}


def test_json_spec_loads_lists():
    spec = SynthesisSpec.from_json(json.dumps({"n_per_class": [3, 3], "class_shift": [0, 1]}))
    assert spec.n_per_class == (3, 3)
