"""DODGE(epsilon): weighted tabu sampling with epsilon-dominance bookkeeping."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config_space import (
    Choice,
    ConfigSpace,
    EvalResult,
    IntRange,
    PipelineConfig,
    RealRange,
    Range,
    instantiate,
)
from .dataset import FlowDataset
from .flash import best_result, config_values, metric_name, safe_evaluate

# An option is either (path, value) for a categorical choice or (path,)
# for a numeric range.
Option = tuple


@dataclass
class ResultArchive:
    epsilon: float = 0.2
    scores: list[float] = field(default_factory=list)

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def is_novel(self, s: float) -> bool:
        return all(abs(s - a) >= self.epsilon for a in self.scores)


@dataclass
class DodgeRun:
    """Everything a run produced.

    ``used[t]`` lists the options sampled at iteration t and ``promoted[t]``
    whether they were promoted (True) or demoted.
    """

    best: EvalResult
    history: list[EvalResult]
    weights: dict[Option, int]
    archive: ResultArchive
    used: list[list[Option]]
    promoted: list[bool]
    subranges: dict[str, tuple[float, float]]


class WeightedSampler:
    """Draws configs favouring the highest-weight option at every decision.

    With ``recentre`` set, a promoted numeric range shrinks to half its
    width around the value just drawn and a demoted one returns to its
    original bounds.
    """

    def __init__(self, space: ConfigSpace, rng: np.random.Generator, recentre: bool = False):
        self.space = space
        self.rng = rng
        self.recentre = recentre
        self.weights: dict[Option, int] = {}
        self.original: dict[str, tuple[float, float]] = {}
        self.subranges: dict[str, tuple[float, float]] = {}
        for path, r in space.nodes():
            if isinstance(r, Choice):
                for o in r.options:
                    self.weights[(path, o)] = 0
            else:
                self.weights[(path,)] = 0
                self.original[path] = self.subranges[path] = (r.lo, r.hi)
        self._last: dict[str, float] = {}

    def draw(self, path: str, r: Range):
        if isinstance(r, Choice):
            w = np.array([self.weights[(path, o)] for o in r.options])
            top = np.flatnonzero(w == w.max())
            return r.options[int(top[self.rng.integers(len(top))])]
        lo, hi = self.subranges[path]
        if isinstance(r, IntRange):
            v = int(self.rng.integers(int(lo), int(hi) + 1))
        else:
            v = float(self.rng.uniform(lo, hi))
        self._last[path] = v
        return v

    def sample(self) -> tuple[PipelineConfig, list[Option]]:
        self._last = {}
        config, paths = instantiate(self.space, self.draw)
        values = config_values(config)
        options = [(p, values[p]) if (p, values[p]) in self.weights else (p,) for p in paths]
        return config, options

    def update(self, options: list[Option], promote: bool) -> None:
        step = 1 if promote else -1
        for o in options:
            self.weights[o] += step
            if len(o) == 1 and self.recentre:
                self._move(o[0], promote)

    def _move(self, path: str, promote: bool) -> None:
        lo0, hi0 = self.original[path]
        if not promote:
            self.subranges[path] = (lo0, hi0)
            return
        lo, hi = self.subranges[path]
        half = (hi - lo) / 4.0
        v = self._last.get(path, (lo + hi) / 2.0)
        new_lo, new_hi = max(lo0, v - half), min(hi0, v + half)
        if isinstance(lo0, int) and isinstance(hi0, int):
            new_lo, new_hi = int(math.floor(new_lo)), int(math.ceil(new_hi))
        self.subranges[path] = (new_lo, new_hi)


def run_dodge(
    space: ConfigSpace,
    evaluate_fn: Callable[[PipelineConfig], EvalResult],
    metric: str = "f_measure",
    n: int = 30,
    epsilon: float = 0.2,
    seed=0,
    recentre: bool = False,
) -> DodgeRun:
    if n < 1:
        raise ValueError("n must be >= 1")
    metric = metric_name(metric)
    archive = ResultArchive(epsilon)
    sampler = WeightedSampler(space, np.random.default_rng(seed), recentre)
    history: list[EvalResult] = []
    used: list[list[Option]] = []
    promoted: list[bool] = []
    for _ in range(n):
        config, options = sampler.sample()
        result = evaluate_fn(config)
        s = result.objectives[metric]
        novel = archive.is_novel(s)
        sampler.update(options, novel)
        if novel:
            archive.scores.append(s)
        history.append(result)
        used.append(options)
        promoted.append(novel)
    return DodgeRun(
        best_result(history, [metric]),
        history,
        dict(sampler.weights),
        archive,
        used,
        promoted,
        dict(sampler.subranges),
    )


def dodge_optimize(
    space: ConfigSpace,
    tune: FlowDataset | None,
    validation: FlowDataset | None,
    metric: str = "f_measure",
    n: int = 30,
    epsilon: float = 0.2,
    seed: int = 0,
    recentre: bool = False,
    evaluate_fn: Callable[[PipelineConfig], EvalResult] | None = None,
    far_mode: str = "tp_tn",
) -> tuple[EvalResult, list[EvalResult]]:
    """Sample ``n`` configs; returns the best result and the full history."""
    if evaluate_fn is None:
        if tune is None or validation is None:
            raise ValueError("tune and validation data are required without evaluate_fn")
        eval_seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])

        def evaluate_fn(c):
            return safe_evaluate(c, tune, validation, eval_seed, far_mode)

    run = run_dodge(space, evaluate_fn, metric, n, epsilon, [seed, 3], recentre)
    return run.best, run.history


def weight_balance(run: DodgeRun) -> dict[Option, int]:
    """Promotions minus demotions of the iterations that used each option."""
    net: Counter = Counter()
    for options, up in zip(run.used, run.promoted):
        for o in options:
            net[o] += 1 if up else -1
    return {o: net.get(o, 0) for o in run.weights}


def significance_epsilon(z: float = 1.96, sd: float = 0.05) -> float:
    """Score gap below which two results are statistically indistinguishable:
    a two-sided z interval on a difference, z * 2 * sd."""
    return z * 2.0 * sd


def epsilon_regions(epsilon: float, n_objectives: int) -> int:
    """Number of epsilon-sized cells in an n-objective unit output space,
    rounded up."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if n_objectives < 1:
        raise ValueError("need at least one objective")
    cells = (1.0 / epsilon) ** n_objectives
    # Guard against 25.000000000000004 style round-off on exact powers.
    return int(math.ceil(cells - 1e-9))


def epsilon_regions_rounded(epsilon: float, n_objectives: int) -> int:
    """The same count rounded to the nearest integer."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    return int(round((1.0 / epsilon) ** n_objectives))
