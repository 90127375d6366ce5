"""Scott-Knott ranking with a bootstrap significance gate and Cliff's delta effect size."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

SMALL_EFFECT = 0.147


@dataclass(frozen=True)
class Treatment:
    name: str
    scores: tuple[float, ...]

    def __post_init__(self):
        s = tuple(float(v) for v in self.scores)
        if not s:
            raise ValueError(f"treatment {self.name!r} has no scores")
        if not np.all(np.isfinite(s)):
            raise ValueError(f"treatment {self.name!r} has non-finite scores")
        object.__setattr__(self, "scores", s)

    @property
    def mean(self) -> float:
        return float(np.mean(self.scores))


def cliffs_delta(A: Sequence[float], B: Sequence[float]) -> float:
    """P(a > b) - P(a < b) over all pairs, counted by binary search."""
    a = np.asarray(A, dtype=np.float64)
    b = np.sort(np.asarray(B, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("cliffs_delta needs two non-empty lists")
    below = np.searchsorted(b, a, side="left")
    above = len(b) - np.searchsorted(b, a, side="right")
    return float((below.sum() - above.sum()) / (len(a) * len(b)))


def bootstrap_significant(
    A: Sequence[float],
    B: Sequence[float],
    n_boot: int = 512,
    seed=0,
    alpha: float = 0.05,
) -> bool:
    """Two-sided test of a mean difference against resamples of the pooled data.

    Both groups are redrawn with replacement from A + B (the null of one
    shared population). The difference is significant when the observed
    absolute mean gap exceeds the (1 - alpha) quantile of the resampled gaps.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    a = np.asarray(A, dtype=np.float64)
    b = np.asarray(B, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("bootstrap test needs two non-empty lists")
    observed = abs(a.mean() - b.mean())
    pooled = np.concatenate([a, b])
    rng = np.random.default_rng(seed)
    ia = rng.integers(0, len(pooled), size=(n_boot, len(a)))
    ib = rng.integers(0, len(pooled), size=(n_boot, len(b)))
    gaps = np.abs(pooled[ia].mean(axis=1) - pooled[ib].mean(axis=1))
    return bool(observed > np.quantile(gaps, 1.0 - alpha))


def split_value(left: Sequence[Treatment], right: Sequence[Treatment]) -> float:
    """Size-weighted squared distance of both sides' means from the pooled mean."""
    m = np.concatenate([t.scores for t in left])
    n = np.concatenate([t.scores for t in right])
    mu = np.concatenate([m, n]).mean()
    total = len(m) + len(n)
    return float(len(m) / total * (m.mean() - mu) ** 2 + len(n) / total * (n.mean() - mu) ** 2)


def best_split(treatments: Sequence[Treatment]) -> tuple[list[Treatment], list[Treatment], float]:
    """Contiguous cut of an ordered list that maximizes :func:`split_value`;
    the leftmost cut wins ties."""
    if len(treatments) < 2:
        raise ValueError("best_split needs at least two treatments")
    best_cut, best = 1, -1.0
    for cut in range(1, len(treatments)):
        e = split_value(treatments[:cut], treatments[cut:])
        if e > best:
            best_cut, best = cut, e
    return list(treatments[:best_cut]), list(treatments[best_cut:]), best


def _best_gaps(sums: np.ndarray, sizes: np.ndarray) -> np.ndarray:
    """|mean(left) - mean(right)| at the best cut, for each row of
    per-treatment score sums (rows = resamples)."""
    means = sums / sizes
    order = np.argsort(-means, axis=1, kind="stable")
    s = np.take_along_axis(sums, order, axis=1)
    n = sizes[order]
    cs, cn = np.cumsum(s, axis=1)[:, :-1], np.cumsum(n, axis=1)[:, :-1]
    total_s, total_n = s.sum(axis=1, keepdims=True), n.sum(axis=1, keepdims=True)
    mu = total_s / total_n
    ml = cs / cn
    mr = (total_s - cs) / (total_n - cn)
    e = cn / total_n * (ml - mu) ** 2 + (total_n - cn) / total_n * (mr - mu) ** 2
    best = np.argmax(e, axis=1)
    rows = np.arange(len(sums))
    return np.abs(ml[rows, best] - mr[rows, best])


def split_significant(
    part: Sequence[Treatment],
    left: Sequence[Treatment],
    n_boot: int = 512,
    seed=0,
    alpha: float = 0.05,
) -> bool:
    """Bootstrap test of a best split that accounts for the split having been
    chosen to maximize the gap.

    Each resample redraws every treatment's scores from the pooled scores
    of ``part`` and applies the same best-cut search, so the null
    distribution describes the largest gap one would find by chance.
    """
    if n_boot < 1:
        raise ValueError("n_boot must be >= 1")
    pooled = np.concatenate([t.scores for t in part])
    sizes = np.array([len(t.scores) for t in part], dtype=np.float64)
    a = np.concatenate([t.scores for t in left])
    b = np.concatenate([t.scores for t in part[len(left):]])
    observed = abs(a.mean() - b.mean())
    rng = np.random.default_rng(seed)
    sums = np.empty((n_boot, len(part)))
    for j, size in enumerate(sizes.astype(int)):
        sums[:, j] = pooled[rng.integers(0, len(pooled), size=(n_boot, size))].sum(axis=1)
    return bool(observed > np.quantile(_best_gaps(sums, sizes), 1.0 - alpha))


@dataclass(frozen=True)
class RankEntry:
    name: str
    rank: int
    median: float
    iqr: float
    mean: float


@dataclass(frozen=True)
class RankTable:
    entries: tuple[RankEntry, ...]

    def rank_of(self, name: str) -> int:
        return next(e.rank for e in self.entries if e.name == name)

    @property
    def n_ranks(self) -> int:
        return max(e.rank for e in self.entries)

    def to_dict(self) -> list[dict]:
        return [e.__dict__.copy() for e in self.entries]

    @classmethod
    def from_dict(cls, rows: list[dict]) -> RankTable:
        return cls(tuple(RankEntry(**r) for r in rows))

    def render(self, scale: float = 100.0) -> str:
        width = max(len(e.name) for e in self.entries)
        lines = [f"{'rank':>4}  {'treatment':<{width}}  {'median':>7}  {'iqr':>6}"]
        for e in self.entries:
            lines.append(f"{e.rank:>4}  {e.name:<{width}}  {e.median * scale:>7.1f}  {e.iqr * scale:>6.1f}")
        return "\n".join(lines)


def scott_knott(
    treatments: Sequence[Treatment],
    alpha: float = 0.05,
    effect_threshold: float = SMALL_EFFECT,
    seed: int = 0,
    n_boot: int = 512,
    higher_is_better: bool = True,
    selection_aware: bool = True,
) -> RankTable:
    """Rank treatments; rank 1 holds the best mean.

    The ordered list is cut at :func:`best_split` and each side is ranked
    separately only when the two sides differ both significantly (bootstrap)
    and by at least a small effect (|Cliff's delta| >= ``effect_threshold``).
    With ``selection_aware`` (the default) significance comes from
    :func:`split_significant`; otherwise the two sides are compared with the
    plain two-sample :func:`bootstrap_significant`, which ignores that the
    cut was chosen to maximize the gap and so splits too eagerly.
    """
    if not treatments:
        raise ValueError("scott_knott needs at least one treatment")
    ordered = sorted(treatments, key=lambda t: t.mean, reverse=higher_is_better)
    groups: list[list[Treatment]] = []

    def divide(lo: int, hi: int) -> None:
        part = ordered[lo:hi]
        if len(part) > 1:
            left, right, _ = best_split(part)
            a = np.concatenate([t.scores for t in left])
            b = np.concatenate([t.scores for t in right])
            if selection_aware:
                sig = split_significant(part, left, n_boot, [seed, lo, hi], alpha)
            else:
                sig = bootstrap_significant(a, b, n_boot, [seed, lo, hi], alpha)
            if sig and abs(cliffs_delta(a, b)) >= effect_threshold:
                divide(lo, lo + len(left))
                divide(lo + len(left), hi)
                return
        groups.append(part)

    divide(0, len(ordered))
    entries = []
    for rank, group in enumerate(groups, start=1):
        for t in group:
            q25, q50, q75 = np.percentile(t.scores, [25, 50, 75])
            entries.append(RankEntry(t.name, rank, float(q50), float(q75 - q25), t.mean))
    return RankTable(tuple(entries))
