"""Sequential model-based configuration search with regression-tree surrogates."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config_space import (
    Choice,
    ConfigSpace,
    EvalResult,
    EvaluationError,
    IntRange,
    Pair,
    PipelineConfig,
    RealRange,
    When,
    evaluate,
    sample_pool,
)
from .dataset import FlowDataset
from .learners import TreeModel, fit_regression_tree
from .metrics import Objectives

OPTIMIZED_METRICS = ("recall", "f_measure", "g_score")
METRIC_ALIASES = {"recall": "recall", "f": "f_measure", "f_measure": "f_measure", "g": "g_score", "g_score": "g_score"}

SURROGATE_DEPTH = 8
SURROGATE_MIN_LEAF = 4

# Score given to a config whose pipeline cannot be fitted on the data.
FAILED = Objectives(recall=0.0, precision=0.0, far=1.0, f_measure=0.0, g_score=0.0)


def metric_name(name: str) -> str:
    try:
        return METRIC_ALIASES[name]
    except KeyError:
        raise ValueError(f"unknown metric {name!r}; expected one of {sorted(METRIC_ALIASES)}") from None


@dataclass
class FlashState:
    """Bookkeeping of one run over a fixed candidate pool.

    ``evaluated`` and ``remaining`` hold pool indices; ``scores`` has one
    row of objective values per evaluated index, in evaluation order.
    """

    pool: np.ndarray
    budget_total: int
    projections: np.ndarray
    evaluated: list[int] = field(default_factory=list)
    scores: list[np.ndarray] = field(default_factory=list)
    surrogates: list[TreeModel] = field(default_factory=list)

    @property
    def budget_used(self) -> int:
        return len(self.evaluated)

    @property
    def n_objectives(self) -> int:
        return self.projections.shape[1]

    @property
    def remaining(self) -> np.ndarray:
        mask = np.ones(len(self.pool), dtype=bool)
        mask[self.evaluated] = False
        return np.flatnonzero(mask)


def acquisition_value(predictions: np.ndarray, projections: np.ndarray) -> np.ndarray:
    """Mean projected score of each candidate.

    ``predictions`` is (candidates, objectives) and ``projections`` is
    (N, objectives); with one objective this is the prediction itself
    times the mean weight, so the argmax is unchanged.
    """
    return (predictions @ projections.T).sum(axis=1) / projections.shape[0]


def acquire(predictions: np.ndarray, projections: np.ndarray) -> int:
    """Position of the best candidate; the first one wins ties."""
    if predictions.shape[1] == 1:
        return int(np.argmax(predictions[:, 0]))
    return int(np.argmax(acquisition_value(predictions, projections)))


def flash_search(
    pool: np.ndarray,
    objective: Callable[[int], Sequence[float]],
    budget: int = 30,
    init_size: int = 10,
    n_objectives: int = 1,
    n_projections: int = 30,
    seed=0,
    after_fit: Callable[[FlashState], None] | None = None,
) -> FlashState:
    """Run the search over an encoded pool (rows = candidates).

    ``objective(i)`` returns the true objective vector (higher is better)
    of pool row ``i``. ``after_fit`` is called each time the surrogates are
    refitted, before the acquisition.
    """
    pool = np.asarray(pool, dtype=np.float64)
    if len(pool) == 0:
        raise ValueError("empty candidate pool")
    if not 1 <= init_size < budget:
        raise ValueError(f"need 1 <= init_size < budget, got init_size={init_size}, budget={budget}")
    if budget > len(pool):
        raise ValueError(f"budget {budget} exceeds the pool size {len(pool)}")
    rng = np.random.default_rng(seed)
    projections = rng.random((n_projections, n_objectives))
    state = FlashState(pool, budget, projections)

    def run(i):
        y = np.asarray(objective(int(i)), dtype=np.float64).reshape(-1)
        if y.shape != (n_objectives,):
            raise ValueError(f"objective returned {y.shape[0]} values, expected {n_objectives}")
        state.evaluated.append(int(i))
        state.scores.append(y)

    for i in rng.choice(len(pool), size=init_size, replace=False):
        run(i)
    while state.budget_used < budget:
        X = pool[state.evaluated]
        Y = np.vstack(state.scores)
        state.surrogates = [
            fit_regression_tree(X, Y[:, j], max_depth=SURROGATE_DEPTH, min_leaf=SURROGATE_MIN_LEAF)
            for j in range(n_objectives)
        ]
        if after_fit is not None:
            after_fit(state)
        cand = state.remaining
        pred = np.column_stack([t.predict_value(pool[cand]) for t in state.surrogates])
        run(cand[acquire(pred, projections)])
    return state


# --------------------------------------------------------------------------
# configs


def encoding_width(space: ConfigSpace) -> int:
    return sum(len(r.options) if isinstance(r, Choice) else 1 for _, r in space.nodes())


def config_values(config: PipelineConfig) -> dict[str, object]:
    """Decision path -> value for every decision the config makes."""
    out: dict[str, object] = {"preprocessor": config.preprocessor.kind, "learner": config.learner.kind}
    for prefix, params in (
        (f"preprocessor.{config.preprocessor.kind}", config.preprocessor.params),
        (f"learner.{config.learner.kind}", config.learner.params),
    ):
        for name, v in params.items():
            if isinstance(v, (tuple, list)):
                out[f"{prefix}.{name}[0]"], out[f"{prefix}.{name}[1]"] = v
            else:
                out[f"{prefix}.{name}"] = v
    return out


def _active(space: ConfigSpace, config: PipelineConfig, path: str) -> bool:
    parts = path.split(".")
    if len(parts) == 1:
        return True
    group, kind, name = parts[0], parts[1], parts[2]
    spec = config.preprocessor if group == "preprocessor" else config.learner
    if spec.kind != kind:
        return False
    ranges = space.preprocessors[kind] if group == "preprocessor" else space.learners[kind]
    r = ranges.get(name.split("[")[0])
    if isinstance(r, When):
        return spec.params.get(r.param) == r.value
    return True


def encode_config(config: PipelineConfig, space: ConfigSpace) -> np.ndarray:
    """One-hot categorical choices, min-max scaled numbers, -1 where a
    decision does not apply to this config."""
    if config.preprocessor.kind not in space.preprocessors or config.learner.kind not in space.learners:
        raise ValueError(f"config {config.id} uses a kind outside the space")
    values = config_values(config)
    out: list[float] = []
    for path, r in space.nodes():
        active = _active(space, config, path)
        if isinstance(r, Choice):
            if not active:
                out += [-1.0] * len(r.options)
                continue
            v = values[path]
            if v not in r.options:
                raise ValueError(f"config {config.id}: {path}={v!r} is not an option of the space")
            out += [1.0 if o == v else 0.0 for o in r.options]
        elif isinstance(r, (IntRange, RealRange)):
            if not active:
                out.append(-1.0)
                continue
            v = float(values[path])
            if not r.lo <= v <= r.hi:
                raise ValueError(f"config {config.id}: {path}={v} outside [{r.lo}, {r.hi}]")
            out.append(0.0 if r.hi == r.lo else (v - r.lo) / (r.hi - r.lo))
        else:
            raise TypeError(f"unexpected range {r!r} at {path}")
    return np.asarray(out)


def scalarize(objectives: Objectives, metrics: Sequence[str]) -> float:
    """Unweighted mean of the chosen true objectives."""
    return float(np.mean([objectives[m] for m in metrics]))


def best_result(history: list[EvalResult], metrics: Sequence[str]) -> EvalResult:
    """Highest scalarized result; the earliest one wins ties."""
    scores = [scalarize(r.objectives, metrics) for r in history]
    return history[int(np.argmax(scores))]


def safe_evaluate(config: PipelineConfig, tune: FlowDataset, validation: FlowDataset, seed, far_mode="tp_tn"):
    try:
        return evaluate(config, tune, validation, seed, far_mode)
    except EvaluationError:
        return EvalResult(config, FAILED, 1)


def flash_optimize(
    space: ConfigSpace,
    tune: FlowDataset | None,
    validation: FlowDataset | None,
    objectives: Sequence[str] = ("f_measure",),
    budget: int = 30,
    pool_size: int = 1000,
    init_size: int = 10,
    seed: int = 0,
    n_projections: int = 30,
    evaluate_fn: Callable[[PipelineConfig], EvalResult] | None = None,
    far_mode: str = "tp_tn",
) -> tuple[EvalResult, list[EvalResult]]:
    """Tune a pipeline config on (tune, validation).

    ``evaluate_fn`` replaces the default fit-and-score evaluation, which
    is handy for synthetic landscapes. A config that fails to fit scores
    zero on every objective.
    """
    metrics = [metric_name(m) for m in objectives]
    if not metrics:
        raise ValueError("at least one objective is required")
    if evaluate_fn is None:
        if tune is None or validation is None:
            raise ValueError("tune and validation data are required without evaluate_fn")
        eval_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])

        def evaluate_fn(c):
            return safe_evaluate(c, tune, validation, eval_seed, far_mode)

    pool = sample_pool(space, pool_size, [seed, 0])
    encoded = np.vstack([encode_config(c, space) for c in pool])
    history: list[EvalResult] = []

    def objective(i):
        result = evaluate_fn(pool[i])
        history.append(result)
        return [result.objectives[m] for m in metrics]

    flash_search(
        encoded,
        objective,
        budget=budget,
        init_size=init_size,
        n_objectives=len(metrics),
        n_projections=n_projections,
        seed=[seed, 2],
    )
    return best_result(history, metrics), history


def write_history(path, history: list[EvalResult]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in history:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")


def read_history(path) -> list[EvalResult]:
    with open(path, encoding="utf-8") as fh:
        return [EvalResult.from_dict(json.loads(line)) for line in fh if line.strip()]
