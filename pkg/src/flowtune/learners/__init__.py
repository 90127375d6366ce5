"""Learner specs, training and prediction for cart, rf, nb, knn and gbt."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ..dataset import FlowDataset
from .bayes import NaiveBayesModel, fit_naive_bayes
from .ensemble import EnsembleModel, fit_boosted, fit_random_forest, tree_seed
from .neighbors import KnnModel
from .tree import TreeModel, fit_classification_tree, fit_regression_tree

LEARNER_KINDS = ("cart", "rf", "nb", "knn", "gbt")

# Boosting defaults are the usual library defaults (depth 3, rate 0.1,
# 100 rounds, gbtree); the others fall back to the scikit-learn defaults
# where those sit inside the searchable range.
DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "cart": {"criterion": "gini", "splitter": "best", "min_samples_split": 0.0},
    "rf": {"n_estimators": 100, "criterion": "gini", "min_samples_split": 0.0},
    "nb": {"alpha": 0.1},
    "knn": {"n_neighbors": 5, "weights": "uniform", "metric": "minkowski", "p": 2},
    "gbt": {
        "max_depth": 3,
        "learning_rate": 0.1,
        "n_estimators": 100,
        "booster": "gbtree",
        "reg_lambda": 1.0,
        "reg_alpha": 0.0,
        "rate_drop": 0.1,
    },
}


class LearnerError(ValueError):
    pass


def _check_choice(kind, name, value, options):
    if value not in options:
        raise LearnerError(f"{kind}.{name} must be one of {list(options)}, got {value!r}")


def _check_range(kind, name, value, lo, hi, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise LearnerError(f"{kind}.{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise LearnerError(f"{kind}.{name} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise LearnerError(f"{kind}.{name}={value} outside [{lo}, {hi}]")


def _validate(kind: str, p: dict) -> None:
    if kind in ("cart", "rf"):
        _check_choice(kind, "criterion", p["criterion"], ("gini", "entropy"))
        _check_range(kind, "min_samples_split", p["min_samples_split"], 0.0, 1.0)
    if kind == "cart":
        _check_choice(kind, "splitter", p["splitter"], ("best", "random"))
    elif kind == "rf":
        _check_range(kind, "n_estimators", p["n_estimators"], 50, 150, integer=True)
    elif kind == "nb":
        _check_range(kind, "alpha", p["alpha"], 0.0, 0.1)
    elif kind == "knn":
        _check_range(kind, "n_neighbors", p["n_neighbors"], 2, 25, integer=True)
        _check_choice(kind, "weights", p["weights"], ("uniform", "distance"))
        _check_choice(kind, "metric", p["metric"], ("minkowski", "chebyshev"))
        if p["metric"] == "minkowski":
            _check_range(kind, "p", p["p"], 1, 15, integer=True)
        elif p["p"] != 2:
            raise LearnerError("knn.p is fixed at 2 unless metric is minkowski")
    elif kind == "gbt":
        _check_range(kind, "max_depth", p["max_depth"], 1, 10_000, integer=True)
        if not p["learning_rate"] > 0:
            raise LearnerError(f"gbt.learning_rate must be positive, got {p['learning_rate']}")
        _check_range(kind, "n_estimators", p["n_estimators"], 1, 100_000, integer=True)
        _check_choice(kind, "booster", p["booster"], ("gbtree", "dart"))
        _check_range(kind, "reg_lambda", p["reg_lambda"], 0.0, math.inf)
        _check_range(kind, "reg_alpha", p["reg_alpha"], 0.0, math.inf)
        _check_range(kind, "rate_drop", p["rate_drop"], 0.0, 1.0)


@dataclass(frozen=True)
class LearnerSpec:
    """A learner kind plus its parameters; missing parameters take defaults."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LEARNER_KINDS:
            raise LearnerError(f"unknown learner kind {self.kind!r}; expected one of {list(LEARNER_KINDS)}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise LearnerError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged = {**DEFAULT_PARAMS[self.kind], **self.params}
        _validate(self.kind, merged)
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> LearnerSpec:
        return cls(d["kind"], dict(d.get("params", {})))


@dataclass(eq=False)
class TrainedModel:
    """A fitted learner together with the names it was trained on."""

    spec: LearnerSpec
    model: TreeModel | EnsembleModel | NaiveBayesModel | KnnModel
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]

    @property
    def is_tree_based(self) -> bool:
        return self.spec.kind in ("cart", "rf", "gbt")

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "feature_names": list(self.feature_names),
            "class_names": list(self.class_names),
            "model": self.model.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> TrainedModel:
        spec = LearnerSpec.from_dict(d["spec"])
        loader = {
            "cart": TreeModel,
            "rf": EnsembleModel,
            "gbt": EnsembleModel,
            "nb": NaiveBayesModel,
            "knn": KnnModel,
        }[spec.kind]
        return cls(spec, loader.from_dict(d["model"]), tuple(d["feature_names"]), tuple(d["class_names"]))


def train(spec: LearnerSpec, data: FlowDataset, seed: int = 0) -> TrainedModel:
    if data.n_rows == 0:
        raise LearnerError("cannot train on an empty dataset")
    X, y, L = data.features, data.labels, data.n_classes
    p = spec.params
    if spec.kind == "cart":
        model = fit_classification_tree(
            X,
            y,
            L,
            criterion=p["criterion"],
            splitter=p["splitter"],
            min_samples_split=p["min_samples_split"] * len(y),
            seed=tree_seed(seed, 0),
        )
    elif spec.kind == "rf":
        model = fit_random_forest(
            X,
            y,
            L,
            n_estimators=int(p["n_estimators"]),
            criterion=p["criterion"],
            min_samples_split=p["min_samples_split"] * len(y),
            seed=seed,
        )
    elif spec.kind == "nb":
        model = fit_naive_bayes(X, y, L, alpha=p["alpha"])
    elif spec.kind == "knn":
        model = KnnModel(
            np.array(X), np.array(y), L, int(p["n_neighbors"]), p["weights"], p["metric"], float(p["p"])
        )
    else:
        model = fit_boosted(
            X,
            y,
            L,
            max_depth=int(p["max_depth"]),
            learning_rate=float(p["learning_rate"]),
            n_estimators=int(p["n_estimators"]),
            booster=p["booster"],
            reg_lambda=float(p["reg_lambda"]),
            reg_alpha=float(p["reg_alpha"]),
            rate_drop=float(p["rate_drop"]),
            seed=seed,
        )
    return TrainedModel(spec, model, data.feature_names, data.class_names)


def predict_proba(model: TrainedModel, rows) -> np.ndarray:
    return model.model.predict_proba(rows)


def predict(model: TrainedModel, rows) -> np.ndarray:
    """Class indices; argmax ties go to the lowest class index."""
    return np.argmax(predict_proba(model, rows), axis=1)


def feature_importance(model: TrainedModel) -> list[tuple[str, float]]:
    """(name, share) pairs sorted by decreasing importance.

    Importance is total impurity decrease (cart, rf) or total split gain
    (gbt), normalised to sum to 1. A model without any split scores all
    zeros.
    """
    if not model.is_tree_based:
        raise LearnerError(f"feature importance needs a tree-based model, not {model.spec.kind}")
    raw = model.model.importance()
    total = raw.sum()
    share = raw / total if total > 0 else raw
    order = np.argsort(-share, kind="stable")
    return [(model.feature_names[i], float(share[i])) for i in order]


def save_model(model: TrainedModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh)


def load_model(path) -> TrainedModel:
    with open(path, encoding="utf-8") as fh:
        return TrainedModel.from_dict(json.load(fh))


__all__ = [
    "DEFAULT_PARAMS",
    "LEARNER_KINDS",
    "EnsembleModel",
    "KnnModel",
    "LearnerError",
    "LearnerSpec",
    "NaiveBayesModel",
    "TrainedModel",
    "TreeModel",
    "feature_importance",
    "fit_regression_tree",
    "load_model",
    "predict",
    "predict_proba",
    "save_model",
    "train",
]
