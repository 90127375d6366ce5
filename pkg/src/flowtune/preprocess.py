"""Data preprocessors with separate fit and apply steps, plus SMOTE oversampling."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import ndtri

from .dataset import FlowDataset
from .learners.neighbors import pairwise_distance

PREPROCESSOR_KINDS = (
    "standard_scaler",
    "minmax_scaler",
    "kernel_centerer",
    "normalizer",
    "maxabs_scaler",
    "binarizer",
    "robust_scaler",
    "quantile_transformer",
    "smote",
    "none",
)

INVERTIBLE = ("standard_scaler", "minmax_scaler", "maxabs_scaler", "robust_scaler")

DEFAULT_PARAMS: dict[str, dict[str, Any]] = {
    "standard_scaler": {},
    "minmax_scaler": {},
    "kernel_centerer": {},
    "normalizer": {"norm": "l2"},
    "maxabs_scaler": {},
    "binarizer": {"threshold": 0.0},
    "robust_scaler": {"quantile_range": (25, 75)},
    "quantile_transformer": {"n_quantiles": 1000, "subsample": 100_000, "output_distribution": "uniform"},
    "smote": {"n_neighbors": 5, "n_synthetics": 100, "minkowski_exponent": 2.0},
    "none": {},
}

# Normal outputs are clipped this far inside (0, 1) before the inverse CDF.
_CDF_CLIP = 1e-7


class PreprocessError(ValueError):
    pass


def _in(kind, name, value, lo, hi, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise PreprocessError(f"{kind}.{name} must be a number, got {value!r}")
    if integer and int(value) != value:
        raise PreprocessError(f"{kind}.{name} must be an integer, got {value!r}")
    if not lo <= value <= hi:
        raise PreprocessError(f"{kind}.{name}={value} outside [{lo}, {hi}]")


def _validate(kind: str, p: dict) -> None:
    if kind == "normalizer" and p["norm"] not in ("l1", "l2", "max"):
        raise PreprocessError(f"normalizer.norm must be l1, l2 or max, got {p['norm']!r}")
    if kind == "binarizer":
        _in(kind, "threshold", p["threshold"], 0.0, 100.0)
    if kind == "robust_scaler":
        qr = p["quantile_range"]
        if len(qr) != 2:
            raise PreprocessError("robust_scaler.quantile_range needs two values")
        _in(kind, "quantile_range[0]", qr[0], 0, 50, integer=True)
        _in(kind, "quantile_range[1]", qr[1], 51, 100, integer=True)
    if kind == "quantile_transformer":
        _in(kind, "n_quantiles", p["n_quantiles"], 100, 1000, integer=True)
        _in(kind, "subsample", p["subsample"], 1000, 100_000, integer=True)
        if p["output_distribution"] not in ("normal", "uniform"):
            raise PreprocessError("quantile_transformer.output_distribution must be normal or uniform")
    if kind == "smote":
        _in(kind, "n_neighbors", p["n_neighbors"], 1, 20, integer=True)
        if p["n_synthetics"] not in (50, 100, 200, 400):
            raise PreprocessError(f"smote.n_synthetics must be one of 50, 100, 200, 400, got {p['n_synthetics']!r}")
        _in(kind, "minkowski_exponent", p["minkowski_exponent"], 0.1, 5.0)


@dataclass(frozen=True)
class PreprocessorSpec:
    kind: str = "none"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in PREPROCESSOR_KINDS:
            raise PreprocessError(f"unknown preprocessor {self.kind!r}; expected one of {list(PREPROCESSOR_KINDS)}")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise PreprocessError(f"unknown {self.kind} parameters: {sorted(unknown)}")
        merged = {**DEFAULT_PARAMS[self.kind], **self.params}
        if "quantile_range" in merged:
            merged["quantile_range"] = tuple(merged["quantile_range"])
        _validate(self.kind, merged)
        object.__setattr__(self, "params", merged)

    def to_dict(self) -> dict:
        params = {k: list(v) if isinstance(v, tuple) else v for k, v in self.params.items()}
        return {"kind": self.kind, "params": params}

    @classmethod
    def from_dict(cls, d: dict) -> PreprocessorSpec:
        return cls(d["kind"], dict(d.get("params", {})))


@dataclass(frozen=True, eq=False)
class FittedTransformer:
    """A spec plus the column statistics learned at fit time.

    State keys by kind: ``mean``/``scale`` (standard, kernel centering uses
    ``mean`` only), ``min``/``scale`` (minmax), ``scale`` (maxabs),
    ``center``/``scale`` (robust), ``quantiles``/``references`` (quantile).
    """

    spec: PreprocessorSpec
    n_features: int
    state: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "n_features": self.n_features,
            "state": {k: np.asarray(v).tolist() for k, v in self.state.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> FittedTransformer:
        state = {k: np.asarray(v, dtype=np.float64) for k, v in d["state"].items()}
        return cls(PreprocessorSpec.from_dict(d["spec"]), int(d["n_features"]), state)


def _safe(scale: np.ndarray, X: np.ndarray | None = None) -> np.ndarray:
    # Constant columns are divided by 1 instead of 0. Given the fitted
    # columns, a spread below machine epsilon times the column's magnitude
    # is also treated as constant: dividing by it only amplifies round-off
    # and can overflow.
    negligible = scale == 0.0
    if X is not None:
        negligible |= scale <= np.finfo(np.float64).eps * np.abs(X).max(axis=0)
    return np.where(negligible, 1.0, scale)


def fit(spec: PreprocessorSpec, data: FlowDataset, seed: int = 0) -> FittedTransformer:
    """Learn column statistics from ``data`` only. ``seed`` drives the
    quantile transformer's row subsample."""
    if data.n_rows == 0:
        raise PreprocessError("cannot fit a preprocessor on an empty dataset")
    X = data.features
    kind = spec.kind
    state: dict[str, np.ndarray] = {}
    if kind == "standard_scaler":
        state = {"mean": X.mean(axis=0), "scale": _safe(X.std(axis=0), X)}
    elif kind == "minmax_scaler":
        lo = X.min(axis=0)
        state = {"min": lo, "scale": _safe(X.max(axis=0) - lo, X)}
    elif kind == "kernel_centerer":
        state = {"mean": X.mean(axis=0)}
    elif kind == "maxabs_scaler":
        state = {"scale": _safe(np.abs(X).max(axis=0))}
    elif kind == "robust_scaler":
        a, b = spec.params["quantile_range"]
        qa, med, qb = np.percentile(X, [a, 50, b], axis=0)
        state = {"center": med, "scale": _safe(qb - qa, X)}
    elif kind == "quantile_transformer":
        sub = int(spec.params["subsample"])
        if data.n_rows > sub:
            rng = np.random.default_rng(seed)
            X = X[np.sort(rng.choice(data.n_rows, size=sub, replace=False))]
        nq = min(int(spec.params["n_quantiles"]), X.shape[0])
        refs = np.linspace(0.0, 1.0, nq)
        quantiles = np.percentile(X, refs * 100.0, axis=0)
        # Percentile interpolation can break monotonicity by one ulp.
        quantiles = np.maximum.accumulate(quantiles, axis=0)
        state = {"quantiles": quantiles, "references": refs}
    elif kind == "smote":
        check_smote(spec, data)
    return FittedTransformer(spec, data.n_features, state)


def _quantile_column(x, q, refs):
    # Averaging the forward and the reversed interpolation sends repeated
    # quantile values to the middle of their reference span.
    up = np.interp(x, q, refs)
    down = -np.interp(-x, -q[::-1], -refs[::-1])
    return 0.5 * (up + down)


def transform_matrix(t: FittedTransformer, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != t.n_features:
        raise PreprocessError(f"expected {t.n_features} columns, got {X.shape[-1]}")
    kind, s, p = t.spec.kind, t.state, t.spec.params
    if kind in ("none", "smote"):
        return X.copy()
    if kind == "standard_scaler":
        return (X - s["mean"]) / s["scale"]
    if kind == "minmax_scaler":
        return (X - s["min"]) / s["scale"]
    if kind == "kernel_centerer":
        # Centering the rows on the fit mean makes the linear Gram matrix
        # of the fit rows doubly centred; a new row x is mapped so that its
        # kernel row against the fit rows is centred the same way.
        return X - s["mean"]
    if kind == "maxabs_scaler":
        return X / s["scale"]
    if kind == "normalizer":
        if p["norm"] == "l1":
            norms = np.abs(X).sum(axis=1)
        elif p["norm"] == "l2":
            norms = np.sqrt((X * X).sum(axis=1))
        else:
            norms = np.abs(X).max(axis=1)
        return X / _safe(norms)[:, None]
    if kind == "binarizer":
        return (X > p["threshold"]).astype(np.float64)
    if kind == "robust_scaler":
        return (X - s["center"]) / s["scale"]
    # quantile_transformer
    q, refs = s["quantiles"], s["references"]
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        out[:, j] = _quantile_column(X[:, j], q[:, j], refs)
    if p["output_distribution"] == "normal":
        out = ndtri(np.clip(out, _CDF_CLIP, 1.0 - _CDF_CLIP))
    return out


def apply(t: FittedTransformer, data: FlowDataset) -> FlowDataset:
    """Transform features with fitted statistics; labels and row count are kept."""
    return data.with_features(transform_matrix(t, data.features))


def inverse(t: FittedTransformer, X: np.ndarray) -> np.ndarray:
    """Undo an invertible transform (standard, minmax, maxabs, robust)."""
    kind, s = t.spec.kind, t.state
    X = np.asarray(X, dtype=np.float64)
    if kind == "standard_scaler":
        return X * s["scale"] + s["mean"]
    if kind == "minmax_scaler":
        return X * s["scale"] + s["min"]
    if kind == "maxabs_scaler":
        return X * s["scale"]
    if kind == "robust_scaler":
        return X * s["scale"] + s["center"]
    if kind == "none":
        return X.copy()
    raise PreprocessError(f"{kind} has no inverse")


# --------------------------------------------------------------------------
# SMOTE


def _majority(counts: np.ndarray) -> int:
    return int(np.argmax(counts))


def check_smote(spec: PreprocessorSpec, data: FlowDataset) -> None:
    k = int(spec.params["n_neighbors"])
    counts = data.class_counts()
    major = _majority(counts)
    for c, n in enumerate(counts):
        if c != major and 0 < n <= k:
            raise PreprocessError(
                f"smote needs more than n_neighbors={k} rows in class {c} "
                f"({data.class_names[c]!r}), found {n}"
            )


def nearest_neighbors(X: np.ndarray, k: int, exponent: float) -> np.ndarray:
    """Indices of each row's ``k`` nearest other rows (Minkowski distance,
    equal distances resolved by row order)."""
    d = pairwise_distance(X, X, "minkowski", exponent)
    np.fill_diagonal(d, np.inf)
    return np.argsort(d, axis=1, kind="stable")[:, :k]


def oversample(spec: PreprocessorSpec, data: FlowDataset, seed: int = 0) -> FlowDataset:
    """Grow every class except the largest to ``n_synthetics`` rows.

    Each new row is ``p + u * (q - p)`` for a real row ``p`` of the class,
    one of its nearest same-class neighbours ``q`` and ``u ~ U[0, 1]``.
    Classes already at or above the target are left alone. Synthetic rows
    are appended after the original rows.
    """
    if spec.kind != "smote":
        raise PreprocessError(f"oversample needs a smote spec, got {spec.kind}")
    check_smote(spec, data)
    k = int(spec.params["n_neighbors"])
    target = int(spec.params["n_synthetics"])
    exponent = float(spec.params["minkowski_exponent"])
    counts = data.class_counts()
    major = _majority(counts)
    rng = np.random.default_rng(seed)
    new_X, new_y = [data.features], [data.labels]
    for c, n in enumerate(counts):
        if c == major or n == 0 or n >= target:
            continue
        rows = data.features[data.labels == c]
        nn = nearest_neighbors(rows, k, exponent)
        n_new = target - n
        base = rng.integers(0, n, size=n_new)
        pick = nn[base, rng.integers(0, k, size=n_new)]
        u = rng.random(n_new)[:, None]
        new_X.append(rows[base] + u * (rows[pick] - rows[base]))
        new_y.append(np.full(n_new, c))
    return data.with_features(np.vstack(new_X), np.concatenate(new_y))
