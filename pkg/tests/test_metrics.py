import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowtune.metrics import ConfusionMatrix, Objectives, confusion, macro_objectives, score


def brute_objectives(actual, predicted, L, far_mode="tp_tn"):
    """Per-class counting straight from the label lists."""
    rec, prec, far = [], [], []
    for c in range(L):
        tp = sum(1 for a, p in zip(actual, predicted) if a == c and p == c)
        fp = sum(1 for a, p in zip(actual, predicted) if a != c and p == c)
        fn = sum(1 for a, p in zip(actual, predicted) if a == c and p != c)
        tn = sum(1 for a, p in zip(actual, predicted) if a != c and p != c)
        rec.append(tp / (tp + fn) if tp + fn else 0.0)
        prec.append(tp / (tp + fp) if tp + fp else 0.0)
        den = tp + tn if far_mode == "tp_tn" else fp + tn
        far.append(min(fp / den, 1.0) if den else 0.0)
    r, p, f = sum(rec) / L, sum(prec) / L, sum(far) / L
    fm = 2 * p * r / (p + r) if p + r else 0.0
    g = 2 * r * (1 - f) / (r + 1 - f) if r + 1 - f else 0.0
    return r, p, f, fm, g


def test_perfect_binary_matrix():
    assert confusion([0, 1], [0, 1], 2).counts.tolist() == [[1, 0], [0, 1]]


def test_hand_counted_matrix():
    c = confusion([0, 0, 1], [1, 0, 1], 2).counts
    assert c[1, 0] == 1 and c[0, 0] == 1 and c[1, 1] == 1


@given(st.integers(2, 5).flatmap(lambda L: st.tuples(st.just(L), st.lists(st.tuples(st.integers(0, L - 1), st.integers(0, L - 1)), min_size=1, max_size=50))))
def test_marginals(case):
    L, pairs = case
    actual, predicted = zip(*pairs)
    c = confusion(actual, predicted, L).counts
    assert c.sum(axis=1).tolist() == np.bincount(predicted, minlength=L).tolist()
    assert c.sum(axis=0).tolist() == np.bincount(actual, minlength=L).tolist()


def test_perfect_four_class():
    o = score([0, 1, 2, 3] * 3, [0, 1, 2, 3] * 3, 4)
    assert (o.recall, o.precision, o.f_measure, o.far, o.g_score) == (1.0, 1.0, 1.0, 0.0, 1.0)


def test_g_score_substitution():
    from flowtune.metrics import harmonic

    assert harmonic(0.8, 1 - 0.2) == pytest.approx(0.8)


def test_two_by_two_all_ones():
    o = macro_objectives(ConfusionMatrix(np.array([[1, 1], [1, 1]])))
    assert (o.recall, o.precision, o.far, o.f_measure, o.g_score) == (0.5, 0.5, 0.5, 0.5, 0.5)


def test_conventional_far_mode():
    o = macro_objectives(ConfusionMatrix(np.array([[1, 1], [1, 1]])), far_mode="conventional")
    assert o.far == 0.5


def test_tp_tn_far_is_capped():
    # class 1 is never right and often predicted: FP / (TP + TN) = 5 / 1
    o = score([0] * 5 + [1], [1] * 5 + [0], 2)
    assert 0.0 <= o.far <= 1.0 and 0.0 <= o.g_score <= 1.0


@given(st.integers(2, 5).flatmap(lambda L: st.tuples(st.just(L), st.lists(st.tuples(st.integers(0, L - 1), st.integers(0, L - 1)), min_size=1, max_size=60))), st.sampled_from(["tp_tn", "conventional"]))
def test_oracle_equivalence(case, mode):
    L, pairs = case
    actual, predicted = zip(*pairs)
    got = score(actual, predicted, L, mode)
    want = brute_objectives(actual, predicted, L, mode)
    for g, w in zip((got.recall, got.precision, got.far, got.f_measure, got.g_score), want):
        assert abs(g - w) <= 1e-12


@given(st.integers(2, 5).flatmap(lambda L: st.tuples(st.just(L), st.permutations(range(L)), st.lists(st.tuples(st.integers(0, L - 1), st.integers(0, L - 1)), min_size=1, max_size=60))))
def test_permutation_invariance(case):
    L, perm, pairs = case
    actual, predicted = zip(*pairs)
    a = score(actual, predicted, L)
    b = score([perm[x] for x in actual], [perm[x] for x in predicted], L)
    assert a.to_dict() == pytest.approx(b.to_dict(), abs=1e-12)


@given(st.integers(2, 5).flatmap(lambda L: st.tuples(st.just(L), st.lists(st.tuples(st.integers(0, L - 1), st.integers(0, L - 1)), min_size=1, max_size=60))))
def test_bounds(case):
    L, pairs = case
    actual, predicted = zip(*pairs)
    o = score(actual, predicted, L)
    for v in o.to_dict().values():
        assert 0.0 <= v <= 1.0
    assert o.f_measure <= np.sqrt(o.precision * o.recall) + 1e-12
    assert o.g_score <= np.sqrt(o.recall * (1 - o.far)) + 1e-12


def test_errors():
    with pytest.raises(ValueError, match="length"):
        confusion([0, 1], [0], 2)
    with pytest.raises(ValueError, match="empty"):
        macro_objectives(ConfusionMatrix(np.zeros((2, 2), int)))


def test_objectives_json_keys():
    o = score([0, 1], [0, 1], 2)
    assert set(o.to_dict()) == {"recall", "precision", "far", "f_measure", "g_score"}
    assert Objectives.from_dict(o.to_dict()) == o
