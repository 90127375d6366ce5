"""The joint preprocessor x learner option space, pipeline configs and their evaluation."""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Union

import numpy as np

from . import learners, preprocess
from .dataset import FlowDataset
from .learners import LearnerSpec, TrainedModel
from .metrics import Objectives, score
from .preprocess import FittedTransformer, PreprocessorSpec


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"empty integer range [{self.lo}, {self.hi}]")

    def draw(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def contains(self, v) -> bool:
        return int(v) == v and self.lo <= v <= self.hi


@dataclass(frozen=True)
class RealRange:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty real range [{self.lo}, {self.hi}]")

    def draw(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(self.lo, self.hi))

    def contains(self, v) -> bool:
        return self.lo <= v <= self.hi


@dataclass(frozen=True)
class Choice:
    options: tuple

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))
        if not self.options:
            raise ValueError("a choice needs at least one option")

    def draw(self, rng: np.random.Generator):
        return self.options[int(rng.integers(len(self.options)))]

    def contains(self, v) -> bool:
        return v in self.options


@dataclass(frozen=True)
class Pair:
    """Two ranges drawn independently into one tuple parameter."""

    first: IntRange | RealRange
    second: IntRange | RealRange


@dataclass(frozen=True)
class When:
    """A range that applies only when a sibling parameter has a given value;
    otherwise the parameter takes ``otherwise``."""

    param: str
    value: Any
    range: IntRange | RealRange | Choice
    otherwise: Any


Range = Union[IntRange, RealRange, Choice, Pair, When]
NumericRange = Union[IntRange, RealRange]

PREPROCESSOR_RANGES: dict[str, dict[str, Range]] = {
    "standard_scaler": {},
    "minmax_scaler": {},
    "kernel_centerer": {},
    "normalizer": {"norm": Choice(("l1", "l2", "max"))},
    "maxabs_scaler": {},
    "binarizer": {"threshold": RealRange(0.0, 100.0)},
    "robust_scaler": {"quantile_range": Pair(IntRange(0, 50), IntRange(51, 100))},
    "quantile_transformer": {
        "n_quantiles": IntRange(100, 1000),
        "subsample": IntRange(1000, 100_000),
        "output_distribution": Choice(("normal", "uniform")),
    },
    "smote": {
        "n_neighbors": IntRange(1, 20),
        "n_synthetics": Choice((50, 100, 200, 400)),
        "minkowski_exponent": RealRange(0.1, 5.0),
    },
    "none": {},
}

LEARNER_RANGES: dict[str, dict[str, Range]] = {
    "cart": {
        "min_samples_split": RealRange(0.0, 1.0),
        "criterion": Choice(("gini", "entropy")),
        "splitter": Choice(("best", "random")),
    },
    "rf": {
        "n_estimators": IntRange(50, 150),
        "criterion": Choice(("gini", "entropy")),
        "min_samples_split": RealRange(0.0, 1.0),
    },
    "nb": {"alpha": RealRange(0.0, 0.1)},
    "knn": {
        "n_neighbors": IntRange(2, 25),
        "weights": Choice(("uniform", "distance")),
        "metric": Choice(("minkowski", "chebyshev")),
        "p": When("metric", "minkowski", IntRange(1, 15), 2),
    },
    "gbt": {
        "max_depth": IntRange(1, 20),
        "learning_rate": RealRange(0.05, 1.0),
        "n_estimators": IntRange(50, 150),
        "booster": Choice(("gbtree", "dart")),
    },
}


@dataclass(frozen=True)
class ConfigSpace:
    """Preprocessor and learner templates, each a kind with parameter ranges."""

    preprocessors: dict[str, dict[str, Range]]
    learners: dict[str, dict[str, Range]]
    name: str = "custom"

    def __post_init__(self):
        if not self.preprocessors or not self.learners:
            raise ValueError("a config space needs at least one preprocessor and one learner")
        for kind in self.preprocessors:
            if kind not in preprocess.PREPROCESSOR_KINDS:
                raise ValueError(f"unknown preprocessor {kind!r}")
        for kind in self.learners:
            if kind not in learners.LEARNER_KINDS:
                raise ValueError(f"unknown learner {kind!r}")

    def nodes(self) -> list[tuple[str, Range]]:
        """Every decision in the space as (path, range), in a fixed order."""
        out: list[tuple[str, Range]] = [("preprocessor", Choice(tuple(self.preprocessors)))]
        for kind, params in self.preprocessors.items():
            out += _param_nodes(f"preprocessor.{kind}", params)
        out.append(("learner", Choice(tuple(self.learners))))
        for kind, params in self.learners.items():
            out += _param_nodes(f"learner.{kind}", params)
        return out

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "preprocessors": {k: {p: _range_to_dict(r) for p, r in v.items()} for k, v in self.preprocessors.items()},
            "learners": {k: {p: _range_to_dict(r) for p, r in v.items()} for k, v in self.learners.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> ConfigSpace:
        return cls(
            {k: {p: _range_from_dict(r) for p, r in v.items()} for k, v in d["preprocessors"].items()},
            {k: {p: _range_from_dict(r) for p, r in v.items()} for k, v in d["learners"].items()},
            d.get("name", "custom"),
        )

    @classmethod
    def from_json(cls, text: str) -> ConfigSpace:
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        # Key order is kept: it fixes the order in which decisions are drawn.
        return json.dumps(self.to_dict(), indent=1)


def _param_nodes(prefix: str, params: dict[str, Range]) -> list[tuple[str, Range]]:
    out = []
    for name, r in params.items():
        if isinstance(r, Pair):
            out += [(f"{prefix}.{name}[0]", r.first), (f"{prefix}.{name}[1]", r.second)]
        elif isinstance(r, When):
            out.append((f"{prefix}.{name}", r.range))
        else:
            out.append((f"{prefix}.{name}", r))
    return out


def _range_to_dict(r: Range) -> dict:
    if isinstance(r, IntRange):
        return {"type": "int", "lo": r.lo, "hi": r.hi}
    if isinstance(r, RealRange):
        return {"type": "real", "lo": r.lo, "hi": r.hi}
    if isinstance(r, Choice):
        return {"type": "choice", "options": list(r.options)}
    if isinstance(r, Pair):
        return {"type": "pair", "first": _range_to_dict(r.first), "second": _range_to_dict(r.second)}
    return {
        "type": "when",
        "param": r.param,
        "value": r.value,
        "range": _range_to_dict(r.range),
        "otherwise": r.otherwise,
    }


def _range_from_dict(d: dict) -> Range:
    t = d["type"]
    if t == "int":
        return IntRange(int(d["lo"]), int(d["hi"]))
    if t == "real":
        return RealRange(float(d["lo"]), float(d["hi"]))
    if t == "choice":
        return Choice(tuple(d["options"]))
    if t == "pair":
        return Pair(_range_from_dict(d["first"]), _range_from_dict(d["second"]))
    if t == "when":
        return When(d["param"], d["value"], _range_from_dict(d["range"]), d["otherwise"])
    raise ValueError(f"unknown range type {t!r}")


PRESETS = ("full-table1", "gbt-only", "cart-only", "rf-only")


def preset(name: str) -> ConfigSpace:
    """Built-in spaces.

    ``full-table1`` crosses every preprocessor (including ``none``) with
    every learner including gbt; the single-learner presets keep the raw
    features and search only that learner's parameters.
    """
    if name == "full-table1":
        return ConfigSpace(dict(PREPROCESSOR_RANGES), dict(LEARNER_RANGES), name)
    for kind in ("gbt", "cart", "rf"):
        if name == f"{kind}-only":
            return ConfigSpace({"none": {}}, {kind: LEARNER_RANGES[kind]}, name)
    raise ValueError(f"unknown space preset {name!r}; expected one of {list(PRESETS)}")


# --------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class PipelineConfig:
    preprocessor: PreprocessorSpec
    learner: LearnerSpec

    def to_dict(self) -> dict:
        return {"preprocessor": self.preprocessor.to_dict(), "learner": self.learner.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        return cls(PreprocessorSpec.from_dict(d["preprocessor"]), LearnerSpec.from_dict(d["learner"]))

    @property
    def id(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def __hash__(self):
        return hash(self.id)

    def __eq__(self, other):
        return isinstance(other, PipelineConfig) and self.id == other.id


# A draw function receives (path, range) and returns the chosen value.
Draw = Callable[[str, Range], Any]


def instantiate(space: ConfigSpace, draw: Draw) -> tuple[PipelineConfig, list[str]]:
    """Build a config by asking ``draw`` for every decision along one path
    through the space. Returns the config and the decision paths used."""
    used: list[str] = []

    def pick(path, r):
        used.append(path)
        return draw(path, r)

    pre_kind = pick("preprocessor", Choice(tuple(space.preprocessors)))
    pre_params = _draw_params(f"preprocessor.{pre_kind}", space.preprocessors[pre_kind], pick)
    learner_kind = pick("learner", Choice(tuple(space.learners)))
    learner_params = _draw_params(f"learner.{learner_kind}", space.learners[learner_kind], pick)
    config = PipelineConfig(PreprocessorSpec(pre_kind, pre_params), LearnerSpec(learner_kind, learner_params))
    return config, used


def _draw_params(prefix: str, ranges: dict[str, Range], pick) -> dict:
    params: dict[str, Any] = {}
    # Unconditional parameters first so that conditions can see them.
    for name, r in ranges.items():
        if isinstance(r, Pair):
            params[name] = (pick(f"{prefix}.{name}[0]", r.first), pick(f"{prefix}.{name}[1]", r.second))
        elif not isinstance(r, When):
            params[name] = pick(f"{prefix}.{name}", r)
    for name, r in ranges.items():
        if isinstance(r, When):
            params[name] = pick(f"{prefix}.{name}", r.range) if params.get(r.param) == r.value else r.otherwise
    return params


def random_draw(rng: np.random.Generator) -> Draw:
    return lambda path, r: r.draw(rng)


def sample(space: ConfigSpace, seed=None, rng: np.random.Generator | None = None) -> PipelineConfig:
    """One config: a uniform template, then uniform values within its ranges."""
    rng = np.random.default_rng(seed) if rng is None else rng
    return instantiate(space, random_draw(rng))[0]


def sample_pool(space: ConfigSpace, n: int, seed) -> list[PipelineConfig]:
    """``n`` distinct configs (fewer only if the space is exhausted)."""
    rng = np.random.default_rng(seed)
    pool: list[PipelineConfig] = []
    seen: set[str] = set()
    misses = 0
    while len(pool) < n and misses < 50 * n:
        c = sample(space, rng=rng)
        if c.id in seen:
            misses += 1
            continue
        seen.add(c.id)
        pool.append(c)
    return pool


def contains(space: ConfigSpace, config: PipelineConfig) -> bool:
    """True when every parameter of ``config`` lies inside the space."""
    pre = space.preprocessors.get(config.preprocessor.kind)
    lrn = space.learners.get(config.learner.kind)
    if pre is None or lrn is None:
        return False
    return _params_ok(pre, config.preprocessor.params) and _params_ok(lrn, config.learner.params)


def _params_ok(ranges: dict[str, Range], params: dict) -> bool:
    for name, r in ranges.items():
        v = params.get(name)
        if isinstance(r, Pair):
            if not (r.first.contains(v[0]) and r.second.contains(v[1])):
                return False
        elif isinstance(r, When):
            if params.get(r.param) == r.value:
                if not r.range.contains(v):
                    return False
            elif v != r.otherwise:
                return False
        elif not r.contains(v):
            return False
    return True


# --------------------------------------------------------------------------
# evaluation


class EvaluationError(RuntimeError):
    pass


@dataclass(frozen=True)
class EvalResult:
    config: PipelineConfig
    objectives: Objectives
    evaluation_cost: int = 1
    seconds: float = field(default=0.0, compare=False)

    def to_dict(self) -> dict:
        return {
            "id": self.config.id,
            "config": self.config.to_dict(),
            "objectives": self.objectives.to_dict(),
            "evaluation_cost": self.evaluation_cost,
            "seconds": self.seconds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalResult:
        return cls(
            PipelineConfig.from_dict(d["config"]),
            Objectives.from_dict(d["objectives"]),
            int(d["evaluation_cost"]),
            float(d.get("seconds", 0.0)),
        )


@dataclass(eq=False)
class FittedPipeline:
    config: PipelineConfig
    transformer: FittedTransformer
    model: TrainedModel

    def predict(self, data: FlowDataset) -> np.ndarray:
        return learners.predict(self.model, preprocess.transform_matrix(self.transformer, data.features))

    def predict_proba(self, data: FlowDataset) -> np.ndarray:
        return learners.predict_proba(self.model, preprocess.transform_matrix(self.transformer, data.features))

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "transformer": self.transformer.to_dict(), "model": self.model.to_dict()}

    @classmethod
    def from_dict(cls, d: dict) -> FittedPipeline:
        return cls(
            PipelineConfig.from_dict(d["config"]),
            preprocess.FittedTransformer.from_dict(d["transformer"]),
            learners.TrainedModel.from_dict(d["model"]),
        )


def fit_pipeline(config: PipelineConfig, data: FlowDataset, seed: int = 0) -> FittedPipeline:
    """Fit the preprocessor on ``data``, oversample if it is SMOTE, then train."""
    try:
        transformer = preprocess.fit(config.preprocessor, data, seed=seed)
        train_data = preprocess.apply(transformer, data)
        if config.preprocessor.kind == "smote":
            train_data = preprocess.oversample(config.preprocessor, train_data, seed=seed)
        model = learners.train(config.learner, train_data, seed=seed)
    except (ValueError, ArithmeticError) as exc:
        raise EvaluationError(f"config {config.id}: {exc}") from exc
    return FittedPipeline(config, transformer, model)


def evaluate(
    config: PipelineConfig,
    tune: FlowDataset,
    validation: FlowDataset,
    seed: int = 0,
    far_mode: str = "tp_tn",
) -> EvalResult:
    """Fit on ``tune`` and score the macro objectives on ``validation``."""
    if tune.feature_names != validation.feature_names or tune.class_names != validation.class_names:
        raise EvaluationError(f"config {config.id}: tune and validation data differ in columns or classes")
    start = time.perf_counter()
    pipe = fit_pipeline(config, tune, seed)
    predicted = pipe.predict(validation)
    objectives = score(validation.labels, predicted, validation.n_classes, far_mode)
    return EvalResult(config, objectives, 1, time.perf_counter() - start)
