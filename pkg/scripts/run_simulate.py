"""Run both synthetic experiments and write CSVs plus summary.json."""

import argparse
import json

from sigtune import experiments

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--out-dir", default="results")
ap.add_argument("--seeds", type=int, default=10)
ap.add_argument("--noise", type=float, default=0.02)
args = ap.parse_args()

cfg = experiments.ExperimentConfig(seeds=args.seeds, noise_fraction=args.noise)
summary = experiments.simulate(args.out_dir, cfg)
print(json.dumps(experiments._clean(summary["convergence"]), indent=2))
