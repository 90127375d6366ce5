"""k-nearest-neighbour classification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def pairwise_distance(A: np.ndarray, B: np.ndarray, metric: str = "minkowski", p: float = 2.0) -> np.ndarray:
    """Distances between every row of ``A`` and every row of ``B``."""
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    out = np.empty((A.shape[0], B.shape[0]))
    # Chunk the query rows so the (chunk, n, d) difference tensor stays small.
    step = max(1, 2_000_000 // max(1, B.shape[0] * B.shape[1]))
    for s in range(0, A.shape[0], step):
        diff = np.abs(A[s : s + step, None, :] - B[None, :, :])
        if metric == "chebyshev":
            out[s : s + step] = diff.max(axis=2)
        elif metric == "minkowski":
            if p == 1:
                out[s : s + step] = diff.sum(axis=2)
            elif p == 2:
                out[s : s + step] = np.sqrt((diff * diff).sum(axis=2))
            else:
                out[s : s + step] = (diff**p).sum(axis=2) ** (1.0 / p)
        else:
            raise ValueError(f"unknown metric {metric!r}")
    return out


@dataclass(eq=False)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    n_classes: int
    n_neighbors: int = 5
    weights: str = "uniform"
    metric: str = "minkowski"
    p: float = 2.0

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def check_columns(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} columns, got {X.shape[-1]}")
        return X

    def predict_proba(self, X) -> np.ndarray:
        X = self.check_columns(X)
        k = min(self.n_neighbors, len(self.y))
        dist = pairwise_distance(X, self.X, self.metric, self.p)
        # Stable sort: equidistant training rows are taken in index order.
        nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
        d = np.take_along_axis(dist, nn, axis=1)
        if self.weights == "distance":
            exact = d == 0.0
            with np.errstate(divide="ignore"):
                w = np.where(exact.any(axis=1, keepdims=True), exact.astype(float), 1.0 / d)
        else:
            w = np.ones_like(d)
        votes = np.zeros((X.shape[0], self.n_classes))
        np.add.at(votes, (np.arange(X.shape[0])[:, None], self.y[nn]), w)
        return votes / votes.sum(axis=1, keepdims=True)

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def to_dict(self) -> dict:
        return {
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "n_classes": self.n_classes,
            "n_neighbors": self.n_neighbors,
            "weights": self.weights,
            "metric": self.metric,
            "p": self.p,
        }

    @classmethod
    def from_dict(cls, d: dict) -> KnnModel:
        return cls(
            np.asarray(d["X"], dtype=np.float64).reshape(len(d["y"]), -1),
            np.asarray(d["y"], dtype=np.int64),
            int(d["n_classes"]),
            int(d["n_neighbors"]),
            d["weights"],
            d["metric"],
            float(d["p"]),
        )
