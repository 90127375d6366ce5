"""Binary decision trees for classification, regression and boosting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._grow import ENTROPY, GINI, NEWTON, apply_tree, grow, presort

CRITERIA = {"gini": GINI, "entropy": ENTROPY}
UNLIMITED_DEPTH = 10_000


@dataclass(eq=False)
class TreeModel:
    """Array-encoded binary tree.

    Node ``i`` is internal when ``feature[i] >= 0``; rows with
    ``x[feature] <= threshold`` go to ``left[i]``. ``value`` holds the leaf
    payload: class probabilities (classification) or a single real number
    (regression and boosting). ``gain`` is the impurity decrease (or
    second-order gain) of each split, zero at leaves.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    n_samples: np.ndarray
    n_features: int
    task: str = "classification"

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_classes(self) -> int:
        return self.value.shape[1]

    @property
    def is_leaf(self) -> np.ndarray:
        return self.feature < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def check_columns(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape[-1]}")
        return X

    def apply(self, X) -> np.ndarray:
        X = self.check_columns(X)
        return apply_tree(X, self.feature, self.threshold, self.left, self.right)

    def predict_value(self, X) -> np.ndarray:
        out = self.value[self.apply(X)]
        return out[:, 0] if self.task != "classification" else out

    def predict_proba(self, X) -> np.ndarray:
        if self.task != "classification":
            raise TypeError("predict_proba needs a classification tree")
        return self.value[self.apply(X)]

    def predict(self, X) -> np.ndarray:
        if self.task != "classification":
            return self.predict_value(X)
        return np.argmax(self.predict_proba(X), axis=1)

    def importance(self) -> np.ndarray:
        """Per-feature total split gain (unnormalised)."""
        imp = np.zeros(self.n_features)
        split = self.feature >= 0
        np.add.at(imp, self.feature[split], self.gain[split])
        return imp

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "gain": self.gain.tolist(),
            "n_samples": self.n_samples.tolist(),
            "n_features": self.n_features,
            "task": self.task,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TreeModel:
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=np.asarray(d["threshold"], dtype=np.float64),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=np.asarray(d["value"], dtype=np.float64).reshape(len(d["feature"]), -1),
            gain=np.asarray(d["gain"], dtype=np.float64),
            n_samples=np.asarray(d["n_samples"], dtype=np.float64),
            n_features=int(d["n_features"]),
            task=d["task"],
        )


def _as_tree(raw, n_features, task, value) -> TreeModel:
    feat, thr, left, right, _, count, gain, _ = raw
    return TreeModel(feat, thr, left, right, value, gain, count, n_features, task)


def fit_classification_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    criterion: str = "gini",
    splitter: str = "best",
    min_samples_split: float = 2,
    max_depth: int | None = None,
    weight: np.ndarray | None = None,
    features: np.ndarray | None = None,
    order: tuple[np.ndarray, np.ndarray] | None = None,
    seed: int = 0,
) -> TreeModel:
    """Greedy CART growth. ``min_samples_split`` is a row count here."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    weight = np.ones(n) if weight is None else np.asarray(weight, dtype=np.float64)
    stats = np.zeros((n, n_classes))
    stats[np.arange(n), y] = weight
    features = np.arange(d) if features is None else np.asarray(features, dtype=np.int64)
    order, xs = presort(X) if order is None else order
    raw = grow(
        X,
        order,
        xs,
        stats,
        weight,
        CRITERIA[criterion],
        features,
        UNLIMITED_DEPTH if max_depth is None else int(max_depth),
        float(max(min_samples_split, 2)),
        1.0,
        0.0,
        0.0,
        0.0,
        -1e-9,
        splitter == "random",
        int(seed),
    )
    node_stats, count = raw[4], raw[5]
    value = node_stats / np.where(count > 0, count, 1.0)[:, None]
    empty = count <= 0
    if empty.any():
        value[empty] = 1.0 / n_classes
    return _as_tree(raw, d, "classification", value)


def fit_newton_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    max_depth: int,
    reg_lambda: float = 1.0,
    reg_alpha: float = 0.0,
    min_child_weight: float = 1.0,
    min_leaf: int = 1,
    gamma: float = 0.0,
    order: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[TreeModel, np.ndarray]:
    """Second-order regression tree with leaf weight -G/(H + lambda).

    Returns the tree and the leaf index of every training row.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    stats = np.column_stack([grad, hess]).astype(np.float64)
    order, xs = presort(X) if order is None else order
    raw = grow(
        X,
        order,
        xs,
        stats,
        np.ones(n),
        NEWTON,
        np.arange(d),
        int(max_depth),
        2.0,
        float(min_leaf),
        float(min_child_weight),
        float(reg_lambda),
        float(reg_alpha),
        float(gamma) + 1e-12,
        False,
        0,
    )
    G, H = raw[4][:, 0], raw[4][:, 1]
    soft = np.sign(G) * np.maximum(np.abs(G) - reg_alpha, 0.0)
    value = (-soft / (H + reg_lambda))[:, None]
    return _as_tree(raw, d, "regression", value), raw[7]


def fit_regression_tree(X: np.ndarray, y: np.ndarray, max_depth: int = 8, min_leaf: int = 4) -> TreeModel:
    """Squared-error regression tree; leaves predict the mean target."""
    y = np.asarray(y, dtype=np.float64)
    tree, _ = fit_newton_tree(
        X, -y, np.ones_like(y), max_depth, reg_lambda=0.0, min_child_weight=0.0, min_leaf=min_leaf
    )
    return tree
