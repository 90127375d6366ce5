"""Random forests and second-order gradient-boosted trees."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._grow import presort
from .tree import TreeModel, fit_classification_tree, fit_newton_tree


@dataclass(eq=False)
class EnsembleModel:
    """A list of trees plus what is needed to combine them.

    For ``rf`` the trees vote. For ``gbt`` the trees are stored round-major,
    ``n_classes`` per round; ``meta["tree_weights"]`` holds each round's
    multiplier (always 1 for gbtree, rescaled by dart) and
    ``meta["learning_rate"]`` the shrinkage.
    """

    kind: str
    trees: list[TreeModel]
    n_classes: int
    n_features: int
    meta: dict = field(default_factory=dict)

    def check_columns(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape[-1]}")
        return X

    def raw_scores(self, X) -> np.ndarray:
        if self.kind != "gbt":
            raise TypeError("raw scores exist only for boosted models")
        X = self.check_columns(X)
        lr = self.meta["learning_rate"]
        weights = self.meta["tree_weights"]
        F = np.zeros((X.shape[0], self.n_classes))
        for r, w in enumerate(weights):
            for k in range(self.n_classes):
                F[:, k] += lr * w * self.trees[r * self.n_classes + k].predict_value(X)
        return F

    def predict_proba(self, X) -> np.ndarray:
        X = self.check_columns(X)
        if self.kind == "gbt":
            return softmax(self.raw_scores(X))
        votes = np.zeros((X.shape[0], self.n_classes))
        rows = np.arange(X.shape[0])
        for tree in self.trees:
            votes[rows, tree.predict(X)] += 1.0
        return votes / len(self.trees)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def importance(self) -> np.ndarray:
        imp = np.zeros(self.n_features)
        for tree in self.trees:
            imp += tree.importance()
        return imp

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n_classes": self.n_classes,
            "n_features": self.n_features,
            "meta": self.meta,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleModel:
        return cls(
            kind=d["kind"],
            trees=[TreeModel.from_dict(t) for t in d["trees"]],
            n_classes=int(d["n_classes"]),
            n_features=int(d["n_features"]),
            meta=d["meta"],
        )


def tree_seed(seed: int, index: int) -> int:
    """Independent per-tree seed derived from (seed, tree index)."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def fit_random_forest(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    n_estimators: int = 100,
    criterion: str = "gini",
    min_samples_split: float = 2,
    seed: int = 0,
) -> EnsembleModel:
    """Bagged CART trees, each on a bootstrap of the rows and
    floor(log2 C) randomly chosen columns."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n, d = X.shape
    n_cols = max(1, int(math.floor(math.log2(d)))) if d > 1 else 1
    order = presort(X)
    trees, subsets = [], []
    for t in range(n_estimators):
        rng = np.random.default_rng(tree_seed(seed, t))
        weight = np.bincount(rng.integers(0, n, size=n), minlength=n).astype(np.float64)
        cols = np.sort(rng.choice(d, size=n_cols, replace=False))
        trees.append(
            fit_classification_tree(
                X,
                y,
                n_classes,
                criterion=criterion,
                min_samples_split=min_samples_split,
                weight=weight,
                features=cols,
                order=order,
                seed=tree_seed(seed, n_estimators + t),
            )
        )
        subsets.append(cols.tolist())
    return EnsembleModel("rf", trees, n_classes, d, {"column_subsets": subsets})


# --------------------------------------------------------------------------
# boosting


def softmax(F: np.ndarray) -> np.ndarray:
    Z = F - F.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def log_loss(F: np.ndarray, y: np.ndarray) -> float:
    """Mean multiclass log-loss of raw scores ``F`` against labels ``y``."""
    Z = F - F.max(axis=1, keepdims=True)
    lse = np.log(np.exp(Z).sum(axis=1))
    return float(np.mean(lse - Z[np.arange(len(y)), y]))


def softmax_grad_hess(F: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gradient p - y and diagonal hessian p(1 - p) of the softmax log-loss."""
    P = softmax(F)
    Y = np.zeros_like(P)
    Y[np.arange(len(y)), y] = 1.0
    return P - Y, P * (1.0 - P)


def fit_boosted(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    max_depth: int = 3,
    learning_rate: float = 0.1,
    n_estimators: int = 100,
    booster: str = "gbtree",
    reg_lambda: float = 1.0,
    reg_alpha: float = 0.0,
    min_child_weight: float = 1.0,
    rate_drop: float = 0.1,
    seed: int = 0,
) -> EnsembleModel:
    """Newton boosting on the softmax objective, one tree per class per round."""
    if not learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    if booster not in ("gbtree", "dart"):
        raise ValueError(f"unknown booster {booster!r}")
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    order = presort(X)
    rng = np.random.default_rng(seed)

    F = np.zeros((n, n_classes))
    # Unweighted training-set output of each round, needed by dart.
    contrib: list[np.ndarray] = []
    weights: list[float] = []
    dropped_log: list[list[int]] = []
    trees: list[TreeModel] = []
    losses = [log_loss(F, y)]

    for _ in range(n_estimators):
        dropped: list[int] = []
        base = F
        if booster == "dart" and weights:
            dropped = np.flatnonzero(rng.random(len(weights)) < rate_drop).tolist()
            if dropped:
                base = F - sum(weights[j] * contrib[j] for j in dropped)
        G, H = softmax_grad_hess(base, y)
        out = np.empty((n, n_classes))
        for k in range(n_classes):
            tree, leaf_of = fit_newton_tree(
                X,
                G[:, k],
                H[:, k],
                max_depth,
                reg_lambda=reg_lambda,
                reg_alpha=reg_alpha,
                min_child_weight=min_child_weight,
                order=order,
            )
            trees.append(tree)
            out[:, k] = learning_rate * tree.value[leaf_of, 0]
        k_drop = len(dropped)
        w_new = 1.0 / (k_drop + 1)
        if k_drop:
            scale = k_drop / (k_drop + 1.0)
            for j in dropped:
                weights[j] *= scale
            F = base + sum(weights[j] * contrib[j] for j in dropped) + w_new * out
        else:
            F = F + out
        contrib.append(out)
        weights.append(w_new)
        dropped_log.append(dropped)
        losses.append(log_loss(F, y))

    meta = {
        "learning_rate": float(learning_rate),
        "booster": booster,
        "tree_weights": weights,
        "dropped": dropped_log,
        "train_loss": losses,
        "reg_lambda": float(reg_lambda),
        "reg_alpha": float(reg_alpha),
    }
    return EnsembleModel("gbt", trees, n_classes, X.shape[1], meta)
