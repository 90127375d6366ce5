"""Flow datasets: CSV ingestion, synthetic generation and cross-validation splits."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

CLASS_NAMES = ("normal", "loss", "duplicate", "reordering")

# Tstat column names used for generated data. The first three carry the
# loss / duplicate / reordering signatures by default.
TSTAT_COLUMNS = (
    "c_pkts_retx",
    "c_bytes_retx",
    "c_pkts_ooo",
    "c_bytes_all",
    "s_ack_cnt_p",
    "durat",
    "c_first",
    "s_first",
    "c_last",
    "s_last",
    "c_first_ack",
    "s_first_ack",
    "c_rtt_avg",
    "s_rtt_avg",
    "c_rtt_min",
    "s_rtt_min",
    "c_rtt_max",
    "s_rtt_max",
)


class DataError(ValueError):
    """Raised for malformed input data."""


@dataclass(frozen=True, eq=False)
class FlowDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if y.ndim != 1 or len(y) != X.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {len(y)} labels")
        names = tuple(str(n) for n in self.feature_names)
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} feature names for {X.shape[1]} columns")
        if len(set(names)) != len(names):
            raise DataError("duplicate feature names")
        classes = tuple(str(c) for c in self.class_names)
        if len(y) and (y.min() < 0 or y.max() >= len(classes)):
            raise DataError(f"labels must lie in 0..{len(classes) - 1}")
        if not np.all(np.isfinite(X)):
            raise DataError("non-finite feature values")
        X.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "class_names", classes)

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, FlowDataset):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.class_names == other.class_names
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    def subset(self, idx) -> FlowDataset:
        idx = np.asarray(idx, dtype=np.int64)
        return FlowDataset(self.features[idx], self.labels[idx], self.feature_names, self.class_names)

    def with_features(self, features: np.ndarray, labels: np.ndarray | None = None) -> FlowDataset:
        """Copy with replaced features (and optionally labels); names are kept."""
        return FlowDataset(
            features,
            self.labels if labels is None else labels,
            self.feature_names,
            self.class_names,
        )

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def to_csv(self, path, label_column: str = "label") -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([*self.feature_names, label_column])
            for row, lab in zip(self.features, self.labels):
                writer.writerow([repr(float(v)) for v in row] + [self.class_names[lab]])


def _parse_float(text: str) -> float | None:
    text = text.strip()
    if text == "":
        return None
    try:
        return float(text)
    except ValueError:
        raise DataError(f"non-numeric value {text!r}") from None


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(
    path,
    label_column: str = "label",
    class_map: Mapping[str, int] | None = None,
) -> FlowDataset:
    """Read a Tstat-style CSV into a :class:`FlowDataset`.

    Empty feature cells are replaced by the median of the column's other
    values. Without ``class_map``, label strings get indices in order of first
    appearance except that ``"normal"`` is always class 0; integer labels are
    used as class indices directly.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise DataError("missing header")
    header = [h.strip() for h in rows[0]]
    if all(_looks_numeric(h) for h in header if h):
        raise DataError("missing header")
    if label_column not in header:
        raise DataError(f"missing label column {label_column!r}")
    label_pos = header.index(label_column)
    feature_pos = [i for i in range(len(header)) if i != label_pos]
    names = [header[i] for i in feature_pos]

    body = rows[1:]
    for lineno, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} cells, got {len(r)}")

    X = np.empty((len(body), len(feature_pos)))
    for j, pos in enumerate(feature_pos):
        cells = [r[pos] for r in body]
        nonempty = [c for c in cells if c.strip()]
        if nonempty and not any(_looks_numeric(c) for c in nonempty):
            raise DataError(f"column {header[pos]!r} is entirely non-numeric")
        try:
            values = [_parse_float(c) for c in cells]
        except DataError as exc:
            raise DataError(f"column {header[pos]!r}: {exc}") from None
        present = [v for v in values if v is not None]
        if not present:
            raise DataError(f"column {header[pos]!r} has no values")
        fill = float(np.median(present)) if len(present) < len(values) else 0.0
        X[:, j] = [fill if v is None else v for v in values]

    raw_labels = [r[label_pos].strip() for r in body]
    labels, class_names = _encode_labels(raw_labels, class_map)
    return FlowDataset(X, labels, tuple(names), class_names)


def _encode_labels(raw: Sequence[str], class_map: Mapping[str, int] | None):
    if class_map is not None:
        unknown = sorted({r for r in raw if r not in class_map})
        if unknown:
            raise DataError(f"unknown label(s) {unknown}")
        n = max(class_map.values()) + 1
        names = ["" for _ in range(n)]
        for name, idx in class_map.items():
            names[idx] = name
        return np.array([class_map[r] for r in raw], dtype=np.int64), tuple(names)

    if raw and all(r.lstrip("-").isdigit() for r in raw):
        ints = np.array([int(r) for r in raw], dtype=np.int64)
        if ints.min() < 0:
            raise DataError("integer labels must be non-negative")
        n = int(ints.max()) + 1
        names = CLASS_NAMES[:n] if n <= len(CLASS_NAMES) else tuple(f"class_{i}" for i in range(n))
        return ints, tuple(names)

    order: list[str] = []
    if "normal" in raw:
        order.append("normal")
    for r in raw:
        if r not in order:
            order.append(r)
    index = {name: i for i, name in enumerate(order)}
    return np.array([index[r] for r in raw], dtype=np.int64), tuple(order)


# --------------------------------------------------------------------------
# synthesis


@dataclass(frozen=True)
class SynthesisSpec:
    """Parameters for :func:`synthesize`.

    Class ``c`` is shifted by ``class_shift[c]`` along its own signature,
    a distinct 0/1 pattern over ``signal_columns``: single columns first,
    then pairs, and so on. ``variant_sd`` adds a per-flow offset shared by
    all signal columns (think TCP variant or link speed) that is observable
    only through the ``variant_column``; it makes the class boundary depend
    on two columns at once.

    With ``regimes_per_class > 0`` every class is instead a mixture of that
    many operating regimes (say, TCP variant crossed with link condition).
    Each regime has a centre drawn uniformly from ``[-regime_spread,
    regime_spread]`` on the signal columns and rows scatter around it with
    ``regime_sd``. The class shift is still added along the signature.
    Boundaries between such classes are ragged, so deep trees pay off.
    """

    n_per_class: tuple[int, ...] = (500, 500, 500, 500)
    n_features: int = 10
    class_shift: tuple[float, ...] = (0.0, 2.0, 2.0, 2.0)
    noise_sd: float = 1.0
    seed: int = 0
    signal_columns: tuple[int, ...] = (0, 1, 2)
    variant_sd: float = 0.0
    variant_column: int | None = None
    regimes_per_class: int = 0
    regime_spread: float = 3.0
    regime_sd: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "n_per_class", tuple(int(n) for n in self.n_per_class))
        object.__setattr__(self, "class_shift", tuple(float(s) for s in self.class_shift))
        object.__setattr__(self, "signal_columns", tuple(int(c) for c in self.signal_columns))
        if len(self.n_per_class) == 0:
            raise DataError("at least one class is required")
        if any(n < 1 for n in self.n_per_class):
            raise DataError("n_per_class must be >= 1 for every class")
        if len(self.class_shift) != len(self.n_per_class):
            raise DataError("class_shift needs one entry per class")
        if self.n_features < 2:
            raise DataError("n_features must be >= 2")
        if not self.noise_sd > 0:
            raise DataError("noise_sd must be positive")
        if self.variant_sd < 0:
            raise DataError("variant_sd must be non-negative")
        cols = self.signal_columns
        if not cols or len(set(cols)) != len(cols) or min(cols) < 0 or max(cols) >= self.n_features:
            raise DataError("signal_columns must be distinct column indices")
        if 2 ** len(cols) < len(self.n_per_class):
            raise DataError("too few signal columns to give every class its own signature")
        if self.variant_column is not None:
            if not 0 <= self.variant_column < self.n_features or self.variant_column in cols:
                raise DataError("variant_column must be a non-signal column index")
        if self.regimes_per_class < 0:
            raise DataError("regimes_per_class must be non-negative")
        if self.regimes_per_class and not (self.regime_spread >= 0 and self.regime_sd > 0):
            raise DataError("regime_spread must be >= 0 and regime_sd positive")

    @classmethod
    def from_json(cls, text: str) -> SynthesisSpec:
        raw = json.loads(text)
        for key in ("n_per_class", "class_shift", "signal_columns"):
            if key in raw:
                raw[key] = tuple(raw[key])
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps(
            {
                "n_per_class": list(self.n_per_class),
                "n_features": self.n_features,
                "class_shift": list(self.class_shift),
                "noise_sd": self.noise_sd,
                "seed": self.seed,
                "signal_columns": list(self.signal_columns),
                "variant_sd": self.variant_sd,
                "variant_column": self.variant_column,
                "regimes_per_class": self.regimes_per_class,
                "regime_spread": self.regime_spread,
                "regime_sd": self.regime_sd,
            },
            sort_keys=True,
        )


def class_signatures(n_classes: int, n_signal: int) -> np.ndarray:
    """0/1 signature matrix (classes x signal columns); class 0 is all zeros."""
    patterns = []
    for size in range(1, n_signal + 1):
        for combo in combinations(range(n_signal), size):
            patterns.append(combo)
    sig = np.zeros((n_classes, n_signal))
    for c in range(1, n_classes):
        sig[c, list(patterns[c - 1])] = 1.0
    return sig


def synthesize(spec: SynthesisSpec) -> FlowDataset:
    rng = np.random.default_rng(spec.seed)
    n_classes = len(spec.n_per_class)
    labels = np.repeat(np.arange(n_classes), spec.n_per_class)
    n = len(labels)
    X = rng.normal(0.0, spec.noise_sd, size=(n, spec.n_features))
    sig = class_signatures(n_classes, len(spec.signal_columns))
    shift = sig * np.asarray(spec.class_shift)[:, None]
    X[:, spec.signal_columns] += shift[labels]
    if spec.regimes_per_class:
        k, cols = spec.regimes_per_class, list(spec.signal_columns)
        centres = rng.uniform(-spec.regime_spread, spec.regime_spread, size=(n_classes, k, len(cols)))
        regime = rng.integers(0, k, size=n)
        noise = rng.normal(0.0, spec.regime_sd, size=(n, len(cols)))
        X[:, cols] = shift[labels] + centres[labels, regime] + noise
    if spec.variant_sd > 0:
        offset = rng.normal(0.0, spec.variant_sd, size=n)
        X[:, spec.signal_columns] += offset[:, None]
        col = spec.variant_column if spec.variant_column is not None else _first_free(spec)
        X[:, col] = offset + rng.normal(0.0, 0.1 * spec.noise_sd, size=n)
    perm = rng.permutation(n)
    names = _column_names(spec.n_features)
    class_names = CLASS_NAMES[:n_classes] if n_classes <= len(CLASS_NAMES) else tuple(
        f"class_{i}" for i in range(n_classes)
    )
    return FlowDataset(X[perm], labels[perm], names, class_names)


def _first_free(spec: SynthesisSpec) -> int:
    return next(i for i in range(spec.n_features) if i not in spec.signal_columns)


def _column_names(n: int) -> tuple[str, ...]:
    names = list(TSTAT_COLUMNS[:n])
    names += [f"f{i}" for i in range(len(names), n)]
    return tuple(names)


# --------------------------------------------------------------------------
# cross-validation


@dataclass(frozen=True)
class FoldSplit:
    """One cross-validation fold.

    ``tune_idx``, ``validation_idx`` and ``test_idx`` partition the rows;
    ``train_idx`` is the union of tune and validation rows (everything except
    the test partition), used when refitting a chosen configuration.
    """

    fold_id: int
    seed: int
    tune_idx: np.ndarray
    validation_idx: np.ndarray
    test_idx: np.ndarray = field(repr=False)

    @property
    def train_idx(self) -> np.ndarray:
        return np.sort(np.concatenate([self.tune_idx, self.validation_idx]))


def _stratified_order(labels: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rows shuffled within each class and grouped by class."""
    parts = []
    for c in np.unique(labels):
        rows = np.flatnonzero(labels == c)
        parts.append(rng.permutation(rows))
    return np.concatenate(parts) if parts else np.empty(0, dtype=np.int64)


def holdout_split(labels: np.ndarray, fraction: float, seed) -> tuple[np.ndarray, np.ndarray]:
    """Stratified split of row indices into (keep, held_out) with
    ``round(fraction * n)`` held-out rows spread evenly over each class."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    order = _stratified_order(labels, rng)
    n = len(order)
    n_out = int(round(fraction * n))
    mask = np.zeros(n, dtype=bool)
    if n_out:
        mask[np.floor(np.arange(n_out) * n / n_out + (n / n_out) - 1).astype(int)] = True
    return np.sort(order[~mask]), np.sort(order[mask])


def kfold_splits(data: FlowDataset, k: int = 10, seed: int = 0, validation_fraction: float = 0.2):
    """Stratified k-fold splits; each fold's non-test rows split 80:20 into
    tune and validation rows."""
    if k < 2:
        raise DataError("k must be >= 2")
    if k > data.n_rows:
        raise DataError(f"k={k} exceeds the row count {data.n_rows}")
    rng = np.random.default_rng(seed)
    order = _stratified_order(data.labels, rng)
    fold_of = np.empty(data.n_rows, dtype=np.int64)
    fold_of[order] = np.arange(data.n_rows) % k
    splits = []
    for f in range(k):
        test = np.flatnonzero(fold_of == f)
        rest = np.flatnonzero(fold_of != f)
        keep, held = holdout_split(data.labels[rest], validation_fraction, [seed, f])
        splits.append(FoldSplit(f, seed, rest[keep], rest[held], test))
    return splits


def merge(a: FlowDataset, b: FlowDataset) -> FlowDataset:
    if a.feature_names != b.feature_names or a.class_names != b.class_names:
        raise DataError("datasets have different columns or classes")
    return FlowDataset(
        np.vstack([a.features, b.features]),
        np.concatenate([a.labels, b.labels]),
        a.feature_names,
        a.class_names,
    )


def planted_spec(seed: int = 0) -> SynthesisSpec:
    """The 4-class, 2,000-row benchmark dataset used by the directional study.

    Classes are regime mixtures on three signal columns plus seven noise
    columns, so default shallow boosting underfits and tuning has room.
    """
    return SynthesisSpec(
        n_per_class=(500, 500, 500, 500),
        n_features=10,
        class_shift=(0.0, 0.0, 0.0, 0.0),
        seed=seed,
        regimes_per_class=16,
        regime_spread=3.0,
        regime_sd=0.3,
    )
