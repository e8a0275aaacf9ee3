"""Weighted significance-recovery error per synthetic workload."""

import argparse

import numpy as np

from sigtune import experiments
from sigtune.synthetic import SUITE

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--seeds", type=int, default=10)
args = ap.parse_args()

cfg = experiments.ExperimentConfig(seeds=args.seeds)
print("workload  p50     p90     max     ground-truth top-k")
for name in SUITE:
    truth, runs = experiments.sa_recovery(name, cfg)
    e = np.array([r.s_error for r in runs])
    print(f"{name:<9} {np.median(e):.3f}   {np.percentile(e, 90):.3f}   {e.max():.3f}   {','.join(truth.top_k)}")
