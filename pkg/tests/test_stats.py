import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flowtune.stats import (
    RankTable,
    Treatment,
    best_split,
    bootstrap_significant,
    cliffs_delta,
    scott_knott,
    split_value,
)


def pairwise_delta(A, B):
    total = 0
    for x in A:
        for y in B:
            total += (x > y) - (x < y)
    return total / (len(A) * len(B))


score_lists = st.lists(st.integers(-5, 5).map(float), min_size=1, max_size=15)


@given(score_lists, score_lists)
def test_cliffs_delta_matches_pair_enumeration(A, B):
    assert cliffs_delta(A, B) == pairwise_delta(A, B)
    assert cliffs_delta(A, B) == -cliffs_delta(B, A)


@given(score_lists, score_lists, st.floats(0.01, 100))
def test_cliffs_delta_scale_invariant(A, B, c):
    assert cliffs_delta([c * a for a in A], [c * b for b in B]) == cliffs_delta(A, B)


@pytest.mark.parametrize(
    "A,B,expected",
    [([1, 2], [1, 3], -0.25), ([1, 2, 3], [0, 0, 0], 1.0), ([0.3, 0.1, 0.3], [0.3, 0.1, 0.3], 0.0)],
)
def test_cliffs_delta_examples(A, B, expected):
    assert cliffs_delta(A, B) == expected


def test_cliffs_delta_empty():
    with pytest.raises(ValueError):
        cliffs_delta([], [1.0])


def test_treatment_validation():
    with pytest.raises(ValueError):
        Treatment("a", ())
    with pytest.raises(ValueError):
        Treatment("a", (1.0, float("nan")))


def test_best_split_symmetric_halves():
    left, right, e = best_split([Treatment("m", (0, 0)), Treatment("n", (1, 1))])
    assert e == pytest.approx(0.25)
    assert [t.name for t in left] == ["m"]


def test_best_split_isolates_outlier():
    ts = [Treatment("a", (0, 0)), Treatment("b", (0, 0)), Treatment("c", (1, 1))]
    # Enumerate both cuts by hand: {a}|{b,c} -> mu=1/3: (2/6)(1/9) + (4/6)(1/36) = 1/18;
    # {a,b}|{c} -> (4/6)(1/9) + (2/6)(4/9) = 2/9.
    assert split_value(ts[:1], ts[1:]) == pytest.approx(1 / 18)
    assert split_value(ts[:2], ts[2:]) == pytest.approx(2 / 9)
    left, right, e = best_split(ts)
    assert [t.name for t in right] == ["c"]
    assert e == pytest.approx(2 / 9)


def test_best_split_identical():
    ts = [Treatment(str(i), (0.4, 0.6)) for i in range(4)]
    assert best_split(ts)[2] == 0.0


def test_best_split_needs_two():
    with pytest.raises(ValueError):
        best_split([Treatment("a", (1,))])


def separated(seed):
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, 0.01, 30), rng.normal(1.0, 0.01, 30)


def test_bootstrap_equal_lists():
    a = [0.1, 0.5, 0.9, 0.3]
    assert not bootstrap_significant(a, a, 512, seed=0)


def test_bootstrap_separated():
    a, b = separated(1)
    assert bootstrap_significant(a, b, 512, seed=1)


def test_bootstrap_rejects_zero_resamples():
    with pytest.raises(ValueError):
        bootstrap_significant([1.0], [2.0], 0)


def test_bootstrap_deterministic():
    rng = np.random.default_rng(4)
    a, b = rng.normal(0, 1, 10), rng.normal(0.7, 1, 10)
    assert bootstrap_significant(a, b, seed=9) == bootstrap_significant(a, b, seed=9)


def test_single_treatment():
    table = scott_knott([Treatment("only", (0.2, 0.4))])
    assert table.rank_of("only") == 1 and table.n_ranks == 1


def test_two_separated_treatments():
    a, b = separated(1)
    table = scott_knott([Treatment("low", a), Treatment("high", b)], seed=1)
    assert table.rank_of("high") == 1 and table.rank_of("low") == 2


@given(st.integers(0, 10_000), st.integers(2, 6))
def test_ranks_contiguous_and_medians_ordered(seed, n):
    rng = np.random.default_rng(seed)
    ts = [Treatment(f"t{i}", rng.normal(rng.integers(0, 3), 0.3, 10)) for i in range(n)]
    table = scott_knott(ts, seed=seed, n_boot=128)
    ranks = sorted({e.rank for e in table.entries})
    assert ranks == list(range(1, len(ranks) + 1))
    by_rank = [e.rank for e in table.entries]
    assert by_rank == sorted(by_rank)


def test_effect_only_gate_is_scale_invariant():
    rng = np.random.default_rng(2)
    raw = [rng.normal(m, 1.0, 10) for m in (0, 0.2, 1.5, 3)]

    def partition(c):
        ts = [Treatment(str(i), c * s) for i, s in enumerate(raw)]
        # alpha=1 turns the bootstrap gate off, leaving only the effect size.
        table = scott_knott(ts, alpha=1.0, seed=0)
        return {e.name: e.rank for e in table.entries}

    assert partition(1.0) == partition(37.5)


def test_lower_is_better():
    a, b = separated(3)
    table = scott_knott([Treatment("low", a), Treatment("high", b)], higher_is_better=False)
    assert table.rank_of("low") == 1


def test_rank_table_round_trip_and_render():
    a, b = separated(5)
    table = scott_knott([Treatment("x", a), Treatment("y", b)])
    assert RankTable.from_dict(table.to_dict()) == table
    assert "rank" in table.render().splitlines()[0]
