"""Cross-validated comparison of default and tuned treatments."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config_space import PipelineConfig, fit_pipeline, preset
from .dataset import FlowDataset, FoldSplit, kfold_splits
from .dodge import dodge_optimize
from .flash import OPTIMIZED_METRICS, flash_optimize, metric_name
from .learners import LearnerSpec, TrainedModel, feature_importance
from .metrics import Objectives, score
from .preprocess import PreprocessorSpec
from .stats import RankTable, Treatment, scott_knott

OPTIMIZERS = ("none", "flash", "dodge")
TOP_K = 10


@dataclass(frozen=True)
class TreatmentSpec:
    """One row of the comparison.

    With ``optimizer="none"`` the space must hold a single learner, which is
    trained with its default parameters on raw features.
    """

    name: str
    optimizer: str = "none"
    space: str = "gbt-only"
    metric: str = "f_measure"
    budget: int = 30
    pool_size: int = 1000
    init_size: int = 10
    epsilon: float = 0.2

    def __post_init__(self):
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}; expected one of {list(OPTIMIZERS)}")
        object.__setattr__(self, "metric", metric_name(self.metric))
        if self.optimizer != "none" and self.budget < 1:
            raise ValueError("budget must be >= 1 when tuning")
        preset(self.space)

    def default_config(self) -> PipelineConfig:
        learners = list(preset(self.space).learners)
        if len(learners) != 1:
            raise ValueError(f"treatment {self.name}: a default needs a single-learner space, not {self.space}")
        return PipelineConfig(PreprocessorSpec("none"), LearnerSpec(learners[0]))

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> TreatmentSpec:
        return cls(**d)


def standard_treatments(metric: str = "f_measure", budget: int = 30) -> list[TreatmentSpec]:
    """Tuned boosting, tuned cart, tuned rf, DODGE over the full space, and
    the three untuned learners."""
    return [
        TreatmentSpec("X-FLASH", "flash", "gbt-only", metric, budget),
        TreatmentSpec("FLASH_CART", "flash", "cart-only", metric, budget),
        TreatmentSpec("FLASH_RF", "flash", "rf-only", metric, budget),
        TreatmentSpec("DODGE", "dodge", "full-table1", metric, budget),
        TreatmentSpec("CART", "none", "cart-only", metric),
        TreatmentSpec("RF", "none", "rf-only", metric),
        TreatmentSpec("XGBOOST", "none", "gbt-only", metric),
    ]


# Tuned treatment -> the default it is compared with for importance shifts.
IMPORTANCE_PAIRS = {"X-FLASH": "XGBOOST", "FLASH_CART": "CART", "FLASH_RF": "RF"}


def fold_seed(seed: int, fold_id: int) -> int:
    return int(np.random.SeedSequence([seed, fold_id]).generate_state(1)[0])


@dataclass(frozen=True)
class FoldResult:
    treatment: str
    fold: int
    config: dict
    config_id: str
    objectives: Objectives
    n_evaluations: int
    seconds: float = field(compare=False)
    importance: tuple[tuple[str, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "treatment": self.treatment,
            "fold": self.fold,
            "config": self.config,
            "config_id": self.config_id,
            "objectives": self.objectives.to_dict(),
            "n_evaluations": self.n_evaluations,
            "seconds": self.seconds,
            "importance": [list(p) for p in self.importance],
        }

    @classmethod
    def from_dict(cls, d: dict) -> FoldResult:
        return cls(
            d["treatment"],
            int(d["fold"]),
            d["config"],
            d["config_id"],
            Objectives.from_dict(d["objectives"]),
            int(d["n_evaluations"]),
            float(d["seconds"]),
            tuple((str(n), float(v)) for n, v in d["importance"]),
        )


def choose_config(
    treatment: TreatmentSpec, tune: FlowDataset, validation: FlowDataset, seed: int
) -> tuple[PipelineConfig, int]:
    """The config a treatment settles on using only tune and validation rows,
    plus the number of evaluations spent."""
    if treatment.optimizer == "none":
        return treatment.default_config(), 0
    space = preset(treatment.space)
    if treatment.optimizer == "flash":
        best, history = flash_optimize(
            space,
            tune,
            validation,
            objectives=(treatment.metric,),
            budget=treatment.budget,
            pool_size=treatment.pool_size,
            init_size=treatment.init_size,
            seed=seed,
        )
    else:
        best, history = dodge_optimize(
            space, tune, validation, treatment.metric, treatment.budget, treatment.epsilon, seed
        )
    return best.config, len(history)


def run_fold(data: FlowDataset, split: FoldSplit, treatment: TreatmentSpec, seed: int) -> FoldResult:
    """Tune on the fold's tune/validation rows, refit the winner on all
    non-test rows and score it once on the test rows."""
    s = fold_seed(seed, split.fold_id)
    start = time.perf_counter()
    try:
        config, n_eval = choose_config(treatment, data.subset(split.tune_idx), data.subset(split.validation_idx), s)
        pipe = fit_pipeline(config, data.subset(split.train_idx), s)
    except Exception as exc:
        raise RuntimeError(f"treatment {treatment.name}, fold {split.fold_id}: {exc}") from exc
    test = data.subset(split.test_idx)
    objectives = score(test.labels, pipe.predict(test), test.n_classes)
    seconds = time.perf_counter() - start
    importance = tuple(feature_importance(pipe.model)) if pipe.model.is_tree_based else ()
    return FoldResult(
        treatment.name, split.fold_id, config.to_dict(), config.id, objectives, n_eval, seconds, importance
    )


def _run_task(args):
    return run_fold(*args)


def importance_shift(
    default_model: TrainedModel | Sequence[tuple[str, float]],
    tuned_model: TrainedModel | Sequence[tuple[str, float]],
    top: int = TOP_K,
) -> tuple[list[str], list[str], list[str]]:
    """Top-``top`` features of each model and the features in only one of
    the two lists (default-only first). Features with zero importance are
    never listed."""
    d = _ranking(default_model)
    t = _ranking(tuned_model)
    if sorted(n for n, _ in d) != sorted(n for n, _ in t):
        raise ValueError("models were trained on different feature names")
    top_d = [n for n, v in d if v > 0][:top]
    top_t = [n for n, v in t if v > 0][:top]
    non_overlap = [n for n in top_d if n not in top_t] + [n for n in top_t if n not in top_d]
    return top_d, top_t, non_overlap


def _ranking(model) -> list[tuple[str, float]]:
    if isinstance(model, TrainedModel):
        return feature_importance(model)
    return [(str(n), float(v)) for n, v in model]


@dataclass
class StudyReport:
    treatments: list[TreatmentSpec]
    k: int
    seed: int
    results: list[FoldResult]
    rankings: dict[str, RankTable]
    meta: dict = field(default_factory=dict)

    def objectives_of(self, name: str, metric: str) -> list[float]:
        rows = sorted((r for r in self.results if r.treatment == name), key=lambda r: r.fold)
        return [r.objectives[metric] for r in rows]

    def median(self, name: str, metric: str) -> float:
        return float(np.median(self.objectives_of(name, metric)))

    def seconds(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for r in self.results:
            out[r.treatment] = out.get(r.treatment, 0.0) + r.seconds
        return out

    def importance_shifts(self) -> list[dict]:
        by_key = {(r.treatment, r.fold): r for r in self.results}
        rows = []
        for tuned, default in IMPORTANCE_PAIRS.items():
            for fold in range(self.k):
                a, b = by_key.get((default, fold)), by_key.get((tuned, fold))
                if a is None or b is None or not a.importance or not b.importance:
                    continue
                top_d, top_t, non = importance_shift(a.importance, b.importance)
                rows.append(
                    {"default": default, "tuned": tuned, "fold": fold, "top_default": top_d, "top_tuned": top_t, "non_overlap": non}
                )
        return rows

    def to_dict(self, timings: bool = True) -> dict:
        results = [r.to_dict() for r in self.results]
        if not timings:
            for r in results:
                r.pop("seconds")
        return {
            "treatments": [t.to_dict() for t in self.treatments],
            "k": self.k,
            "seed": self.seed,
            "results": results,
            "rankings": {m: t.to_dict() for m, t in self.rankings.items()},
            "importance_shifts": self.importance_shifts(),
            "meta": self.meta,
        }

    def to_json(self, timings: bool = True) -> str:
        return json.dumps(self.to_dict(timings), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> StudyReport:
        return cls(
            [TreatmentSpec.from_dict(t) for t in d["treatments"]],
            int(d["k"]),
            int(d["seed"]),
            [FoldResult.from_dict(r) for r in d["results"]],
            _metric_order({m: RankTable.from_dict(t) for m, t in d["rankings"].items()}),
            d.get("meta", {}),
        )

    def __eq__(self, other):
        if not isinstance(other, StudyReport):
            return NotImplemented
        return self.to_dict(timings=False) == other.to_dict(timings=False)

    # -- text rendering -----------------------------------------------------

    def render_metrics(self) -> str:
        """Per metric: ranked treatments with median and IQR (x100); the
        rank-1 treatment with the highest median is flagged with '*'."""
        lines = []
        for metric, table in self.rankings.items():
            lines.append(f"== {metric}")
            width = max(len(e.name) for e in table.entries)
            lines.append(f"  {'rank':>4}  {'treatment':<{width}}  {'median':>6}  {'iqr':>5}")
            top = max((e for e in table.entries if e.rank == 1), key=lambda e: e.median)
            for e in table.entries:
                flag = "*" if e is top else " "
                lines.append(f"{flag} {e.rank:>4}  {e.name:<{width}}  {100 * e.median:>6.1f}  {100 * e.iqr:>5.1f}")
        return "\n".join(lines)

    def render_timing(self) -> str:
        secs = self.seconds()
        width = max(len(n) for n in secs)
        lines = [f"{'treatment':<{width}}  {'seconds':>9}"]
        for name, s in sorted(secs.items(), key=lambda kv: kv[1]):
            lines.append(f"{name:<{width}}  {s:>9.2f}")
        return "\n".join(lines)

    def render_importance(self) -> str:
        rows = self.importance_shifts()
        if not rows:
            return "no default/tuned pairs with tree models"
        lines = []
        for pair in sorted({(r["default"], r["tuned"]) for r in rows}):
            sub = [r for r in rows if (r["default"], r["tuned"]) == pair]
            counts = [len(r["non_overlap"]) for r in sub]
            lines.append(f"{pair[0]} vs {pair[1]}: median non-overlapping features {np.median(counts):g}")
            for r in sub:
                lines.append(f"  fold {r['fold']}: {', '.join(r['non_overlap']) or '-'}")
        return "\n".join(lines)


def _metric_order(rankings: dict[str, RankTable]) -> dict[str, RankTable]:
    # JSON output sorts keys; restore the order tables are rendered in.
    known = [m for m in OPTIMIZED_METRICS if m in rankings]
    return {m: rankings[m] for m in known + sorted(set(rankings) - set(known))}


def rank_treatments(results: list[FoldResult], names: list[str], seed: int) -> dict[str, RankTable]:
    out = {}
    for metric in OPTIMIZED_METRICS:
        groups = [
            Treatment(n, [r.objectives[metric] for r in sorted(results, key=lambda r: r.fold) if r.treatment == n])
            for n in names
        ]
        out[metric] = scott_knott(groups, seed=seed)
    return out


def run_study(
    data: FlowDataset,
    treatments: Sequence[TreatmentSpec],
    k: int = 10,
    seed: int = 0,
    jobs: int = 1,
    progress: Callable[[FoldResult], None] | None = None,
) -> StudyReport:
    """Run every treatment on every fold and rank them per metric."""
    names = [t.name for t in treatments]
    if len(set(names)) != len(names):
        raise ValueError("treatment names must be unique")
    splits = kfold_splits(data, k, seed)
    tasks = [(data, split, t, seed) for split in splits for t in treatments]
    results: list[FoldResult] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for r in pool.map(_run_task, tasks):
                results.append(r)
                if progress:
                    progress(r)
    else:
        for task in tasks:
            r = _run_task(task)
            results.append(r)
            if progress:
                progress(r)
    meta = {"refit": "winning configs are refitted on tune + validation rows before test scoring"}
    return StudyReport(list(treatments), k, seed, results, rank_treatments(results, names, seed), meta)
