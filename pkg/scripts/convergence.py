"""Pipeline vs random search on one synthetic workload, per seed."""

import argparse

from sigtune import experiments
from sigtune.synthetic import SUITE, make_workload

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--workload", choices=sorted(SUITE), default="balanced")
ap.add_argument("--seeds", type=int, default=10)
args = ap.parse_args()

cfg = experiments.ExperimentConfig(seeds=args.seeds)
wl = make_workload(args.workload, cfg.noise_fraction)
wins = 0
print("seed  evals(SA+tune)  best     pipeline_s  random_s")
for seed in range(args.seeds):
    run, _, _ = experiments.pipeline_vs_random(wl, seed, cfg)
    wins += run.win
    fmt = lambda v: "never" if v is None else f"{v:.0f}"  # noqa: E731
    print(f"{seed:<5} {run.n_sa}+{run.n_tuning:<12} {run.best_cost:<8.2f} {fmt(run.pipeline_time):<11} {fmt(run.random_time)}")
print(f"pipeline reached within {cfg.within:.0%} of the optimum first in {wins}/{args.seeds} seeds")
