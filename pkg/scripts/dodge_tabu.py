"""Trace DODGE on two learners: one scores a constant, the other a fresh
uniform draw each time. Prints which learner each iteration used and how
often the constant one appears in each half of the run."""

import argparse

import numpy as np

from flowtune.config_space import Choice, ConfigSpace, EvalResult, RealRange
from flowtune.dodge import run_dodge, weight_balance
from flowtune.metrics import Objectives

SPACE = ConfigSpace(
    {"none": {}},
    {"nb": {"alpha": RealRange(0.0, 0.1)}, "knn": {"weights": Choice(("uniform", "distance"))}},
    "tabu",
)


def evaluator(seed, constant=0.5):
    rng = np.random.default_rng([seed, 99])

    def evaluate(config):
        v = constant if config.learner.kind == "nb" else float(rng.random())
        return EvalResult(config, Objectives(v, v, 1.0 - v, v, v), 1)

    return evaluate


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=20)
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--epsilon", type=float, default=0.2)
    args = ap.parse_args()

    half = args.n // 2
    drops = 0
    for seed in range(args.runs):
        run = run_dodge(SPACE, evaluator(seed), n=args.n, epsilon=args.epsilon, seed=seed)
        trace = "".join("C" if r.config.learner.kind == "nb" else "r" for r in run.history)
        first, second = trace[:half].count("C"), trace[half:].count("C")
        drops += second < first
        assert run.weights == weight_balance(run)
        print(f"seed {seed:>2}: {trace}  constant {first:>2} -> {second:>2}  archive {len(run.archive.scores)}")
    print(f"constant learner used less in the second half in {drops}/{args.runs} runs")


if __name__ == "__main__":
    main()
