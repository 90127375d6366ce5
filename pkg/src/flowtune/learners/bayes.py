"""Multinomial naive Bayes on column-shifted features."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MIN_ALPHA = 1e-10


@dataclass(eq=False)
class NaiveBayesModel:
    """``shift`` is the per-column training minimum subtracted before
    scoring so that every count is non-negative."""

    shift: np.ndarray
    class_log_prior: np.ndarray
    feature_log_prob: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.shift)

    @property
    def n_classes(self) -> int:
        return len(self.class_log_prior)

    def check_columns(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape[-1]}")
        return X

    def joint_log_likelihood(self, X) -> np.ndarray:
        # Rows below the training minimum are clipped to zero counts.
        counts = np.maximum(self.check_columns(X) - self.shift, 0.0)
        return counts @ self.feature_log_prob.T + self.class_log_prior

    def predict_proba(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        jll -= jll.max(axis=1, keepdims=True)
        p = np.exp(jll)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "shift": self.shift.tolist(),
            "class_log_prior": self.class_log_prior.tolist(),
            "feature_log_prob": self.feature_log_prob.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> NaiveBayesModel:
        return cls(
            np.asarray(d["shift"], dtype=np.float64),
            np.asarray(d["class_log_prior"], dtype=np.float64),
            np.asarray(d["feature_log_prob"], dtype=np.float64),
        )


def fit_naive_bayes(X: np.ndarray, y: np.ndarray, n_classes: int, alpha: float = 0.1) -> NaiveBayesModel:
    """Additive smoothing ``alpha`` applies to both the per-class feature
    counts and the class prior, so a class absent from training still gets a
    finite probability."""
    X = np.asarray(X, dtype=np.float64)
    alpha = max(float(alpha), MIN_ALPHA)
    shift = X.min(axis=0)
    counts = X - shift
    onehot = np.zeros((len(y), n_classes))
    onehot[np.arange(len(y)), y] = 1.0
    feature_count = onehot.T @ counts + alpha
    feature_log_prob = np.log(feature_count) - np.log(feature_count.sum(axis=1, keepdims=True))
    class_count = onehot.sum(axis=0) + alpha
    class_log_prior = np.log(class_count) - np.log(class_count.sum())
    return NaiveBayesModel(shift, class_log_prior, feature_log_prob)
