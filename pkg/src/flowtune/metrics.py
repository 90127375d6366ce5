"""Multiclass confusion matrices and macro-averaged objectives."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

OBJECTIVE_NAMES = ("recall", "precision", "far", "f_measure", "g_score")

# FAR denominators: "tp_tn" divides a class's false positives by TP + TN,
# "conventional" by FP + TN.
FAR_MODES = ("tp_tn", "conventional")


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """``counts[i, j]`` is the number of rows of actual class j predicted as i."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.int64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError("confusion counts must be a square matrix")
        if (c < 0).any():
            raise ValueError("confusion counts must be non-negative")
        c.flags.writeable = False
        object.__setattr__(self, "counts", c)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(TP, FP, FN, TN) vectors, one entry per class."""
        tp = np.diag(self.counts).astype(np.float64)
        fp = self.counts.sum(axis=1) - tp
        fn = self.counts.sum(axis=0) - tp
        tn = self.total - tp - fp - fn
        return tp, fp, fn, tn


@dataclass(frozen=True)
class Objectives:
    recall: float
    precision: float
    far: float
    f_measure: float
    g_score: float

    def to_dict(self) -> dict[str, float]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> Objectives:
        return cls(**{k: float(d[k]) for k in OBJECTIVE_NAMES})

    def __getitem__(self, name: str) -> float:
        if name not in OBJECTIVE_NAMES:
            raise KeyError(name)
        return getattr(self, name)


def confusion(actual, predicted, n_classes: int) -> ConfusionMatrix:
    actual = np.asarray(actual, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if actual.shape != predicted.shape or actual.ndim != 1:
        raise ValueError(f"label vectors differ in length: {actual.shape} vs {predicted.shape}")
    for v in (actual, predicted):
        if len(v) and (v.min() < 0 or v.max() >= n_classes):
            raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (predicted, actual), 1)
    return ConfusionMatrix(counts)


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    # Zero denominators score 0 instead of being dropped from the average.
    out = np.zeros_like(num, dtype=np.float64)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def harmonic(a: float, b: float) -> float:
    return 0.0 if a + b == 0 else 2.0 * a * b / (a + b)


def macro_objectives(cm: ConfusionMatrix, far_mode: str = "tp_tn") -> Objectives:
    """Macro recall, precision, false-alarm rate, F-measure and G-score.

    In the default ``tp_tn`` mode a class's false-alarm rate is
    FP / (TP + TN); that ratio can exceed 1 on badly skewed matrices, so
    each per-class term is capped at 1 to keep G-score in [0, 1].
    """
    if far_mode not in FAR_MODES:
        raise ValueError(f"far_mode must be one of {FAR_MODES}")
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    tp, fp, fn, tn = cm.per_class()
    recall = float(_ratio(tp, tp + fn).mean())
    precision = float(_ratio(tp, tp + fp).mean())
    far_den = tp + tn if far_mode == "tp_tn" else fp + tn
    far = float(np.minimum(_ratio(fp, far_den), 1.0).mean())
    return Objectives(
        recall=recall,
        precision=precision,
        far=far,
        f_measure=harmonic(precision, recall),
        g_score=harmonic(recall, 1.0 - far),
    )


def score(actual, predicted, n_classes: int, far_mode: str = "tp_tn") -> Objectives:
    return macro_objectives(confusion(actual, predicted, n_classes), far_mode)
