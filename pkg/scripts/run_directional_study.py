"""Tuned vs default boosting on the planted 4-class dataset, one study per seed.

    python scripts/run_directional_study.py --seeds 0 1 2 --folds 10
"""

import argparse
import time

from flowtune.dataset import planted_spec, synthesize
from flowtune.experiment import run_study, standard_treatments


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, nargs="+", default=list(range(10)))
    ap.add_argument("--folds", type=int, default=10)
    ap.add_argument("--budget", type=int, default=30)
    ap.add_argument("--treatments", nargs="+", default=["X-FLASH", "XGBOOST"])
    args = ap.parse_args()

    treatments = [t for t in standard_treatments("f_measure", args.budget) if t.name in args.treatments]
    wins = 0
    print("seed  " + "  ".join(f"{t.name:>10}" for t in treatments) + "  seconds")
    for seed in args.seeds:
        start = time.perf_counter()
        report = run_study(synthesize(planted_spec(seed)), treatments, k=args.folds, seed=seed)
        medians = [report.median(t.name, "f_measure") for t in treatments]
        wins += medians[0] >= max(medians[1:], default=-1.0)
        cells = "  ".join(f"{m:>10.3f}" for m in medians)
        print(f"{seed:>4}  {cells}  {time.perf_counter() - start:7.1f}", flush=True)
    print(f"{treatments[0].name} median >= the rest in {wins}/{len(args.seeds)} studies")


if __name__ == "__main__":
    main()
