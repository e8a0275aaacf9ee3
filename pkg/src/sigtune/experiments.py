"""Synthetic experiments: SA recovery and pipeline-vs-random-search convergence.

Everything here is deterministic in the seeds, so reruns produce identical
CSV files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import evalkit
from . import manager as mgr
from .sensitivity import SAState, sa_next_config, sa_report, sa_result
from .synthetic import SUITE, SyntheticWorkload, eval_synthetic, make_workload

GT_SEED = 0
RANDOM_NOISE_OFFSET = 100_000


@dataclass(frozen=True)
class ExperimentConfig:
    seeds: int = 10
    noise_fraction: float = 0.02
    gt_samples: int = 100
    top_k: int = evalkit.DEFAULT_TOP_K
    tune_budget: int = 35
    horizon: int = 100  # evaluations compared against random search
    within: float = 0.10
    settings: mgr.TunerSettings = field(default_factory=mgr.TunerSettings)


def ground_truth(wl: SyntheticWorkload, n: int = 100, seed: int = GT_SEED, k: int = evalkit.DEFAULT_TOP_K):
    """RFE ground truth from ``n`` uniformly random noisy evaluations."""
    rng = np.random.default_rng(seed)
    configs = [wl.space.decode(u) for u in rng.random((n, wl.dimension))]
    X = np.array([wl.space.encode(c) for c in configs])
    y = np.array([eval_synthetic(wl, c, (seed, i)) for i, c in enumerate(configs)])
    return evalkit.rfe_ground_truth(X, y, k=k, names=wl.space.names, seed=seed)


@dataclass(frozen=True)
class SARun:
    workload: str
    seed: int
    s_error: float
    significant: tuple
    cv_per_round: tuple
    oob_per_round: tuple
    evaluations: int


def run_sa(wl: SyntheticWorkload, seed: int, settings: mgr.TunerSettings | None = None):
    """Run the SA rounds alone; returns ``(significant, final state, costs per round)``."""
    s = settings or mgr.TunerSettings()
    state = SAState(
        current_space=wl.space,
        round_remaining=s.n_rounds,
        n_per_round=s.n_per_round,
        alpha=s.alpha,
        seed=seed,
        top_k_cap=s.top_k_cap,
    )
    rounds, current, i = [], [], 0
    while not state.complete:
        config = sa_next_config(state)
        cost = eval_synthetic(wl, config, (seed, i))
        current.append(cost)
        i += 1
        state = sa_report(state, config, cost)
        if state.samples_this_round == 0:
            rounds.append(current)
            current = []
    significant, _ = sa_result(state)
    return significant, state, rounds


def sa_recovery(name: str, cfg: ExperimentConfig | None = None, truth=None):
    cfg = cfg or ExperimentConfig()
    wl = make_workload(name, cfg.noise_fraction)
    truth = truth or ground_truth(wl, cfg.gt_samples, GT_SEED, cfg.top_k)
    runs = []
    for seed in range(cfg.seeds):
        significant, state, rounds = run_sa(wl, seed, cfg.settings)
        runs.append(
            SARun(
                workload=name,
                seed=seed,
                s_error=evalkit.weighted_s_error(significant, truth),
                significant=tuple(significant),
                cv_per_round=tuple(evalkit.coefficient_of_variation(r) for r in rounds),
                oob_per_round=tuple(state.round_oob_errors),
                evaluations=sum(len(r) for r in rounds),
            )
        )
    return truth, runs


@dataclass(frozen=True)
class PipelineRun:
    seed: int
    n_sa: int
    n_tuning: int
    best_cost: float  # within the tuning budget
    pipeline_time: float | None  # search time to within ``within`` of the optimum
    random_time: float | None
    random_best: float

    @property
    def win(self) -> bool:
        if self.pipeline_time is None:
            return False
        return self.random_time is None or self.pipeline_time < self.random_time


def run_pipeline(wl: SyntheticWorkload, seed: int, settings: mgr.TunerSettings | None = None, budget: int = 35):
    """Drive a fresh profile until it converges or ``budget`` evaluations are spent."""
    p = mgr.new_profile(wl.name, wl.space, settings, seed)
    clock = 0.0
    while p.phase != mgr.CONVERGED and len(p.history) < budget:
        config = mgr.next_configuration(p)
        cost = eval_synthetic(wl, config, (seed, len(p.history)))
        clock += cost
        p = mgr.report_execution(p, config, cost, timestamp=clock)
    return p


def pipeline_vs_random(wl: SyntheticWorkload, seed: int, cfg: ExperimentConfig | None = None):
    """Tune, then keep running the best configuration up to the horizon; compare with random search."""
    cfg = cfg or ExperimentConfig()
    p = run_pipeline(wl, seed, cfg.settings, cfg.tune_budget)
    costs = [o.cost for o in p.history]
    best = p.best[0]
    while len(costs) < cfg.horizon:
        costs.append(eval_synthetic(wl, best, (seed, len(costs))))
    rs = evalkit.random_search_baseline(
        wl.space, lambda c, i: eval_synthetic(wl, c, (seed, RANDOM_NOISE_OFFSET + i)), cfg.horizon, seed
    )
    phases = [o.phase for o in p.history]
    run = PipelineRun(
        seed=seed,
        n_sa=phases.count(mgr.SA),
        n_tuning=phases.count(mgr.TUNING),
        best_cost=p.best[1],
        pipeline_time=evalkit.search_time_to_within(costs, wl.optimum_cost, cfg.within),
        random_time=evalkit.search_time_to_within(rs, wl.optimum_cost, cfg.within),
        random_best=min(o.cost for o in rs),
    )
    return run, p, costs


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ";".join(_fmt(x) for x in v)
    return str(v)


def write_rows(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(x) for x in r])
    return path


def _inf(v):
    return math.inf if v is None else v


def simulate(out_dir, cfg: ExperimentConfig | None = None, suite=tuple(SUITE), convergence_workload="balanced"):
    """Run both experiments, write per-seed CSVs and ``summary.json``; returns the summary."""
    cfg = cfg or ExperimentConfig()
    out = Path(out_dir)
    summary: dict = {"config": {k: v for k, v in asdict(cfg).items() if k != "settings"}}

    sa_rows, sa_summary = [], {}
    for name in suite:
        truth, runs = sa_recovery(name, cfg)
        for r in runs:
            sa_rows.append((name, r.seed, r.s_error, r.evaluations, r.significant, r.cv_per_round))
        sa_summary[name] = {
            "s_error": evalkit.percentiles([r.s_error for r in runs]),
            "ground_truth_top_k": list(truth.top_k),
            "ground_truth_high": sorted(truth.high_set),
            "ground_truth_test_error": truth.test_error,
        }
    write_rows(
        out / "sa_recovery.csv",
        ("workload", "seed", "s_error", "evaluations", "significant", "cv_per_round"),
        sa_rows,
    )
    summary["sa_recovery"] = sa_summary

    wl = make_workload(convergence_workload, cfg.noise_fraction)
    conv_rows, runs = [], []
    for seed in range(cfg.seeds):
        run, p, costs = pipeline_vs_random(wl, seed, cfg)
        runs.append(run)
        conv_rows.append(
            (seed, run.n_sa, run.n_tuning, run.best_cost, run.pipeline_time, run.random_time, run.random_best, run.win)
        )
        (out / "histories").mkdir(parents=True, exist_ok=True)
        (out / "histories" / f"{convergence_workload}_seed{seed}.csv").write_text(evalkit.history_csv(p.history))
    write_rows(
        out / "convergence.csv",
        ("seed", "n_sa", "n_tuning", "best_cost", "pipeline_time", "random_time", "random_best", "pipeline_wins"),
        conv_rows,
    )
    summary["convergence"] = {
        "workload": convergence_workload,
        "optimum_cost": wl.optimum_cost,
        "best_cost": evalkit.percentiles([r.best_cost for r in runs]),
        "best_relative_gap_median": float(np.median([r.best_cost for r in runs])) / wl.optimum_cost - 1.0,
        "pipeline_time": evalkit.percentiles([r.pipeline_time for r in runs]),
        "random_time": evalkit.percentiles([r.random_time for r in runs]),
        "pipeline_time_median": float(np.median([_inf(r.pipeline_time) for r in runs])),
        "random_time_median": float(np.median([_inf(r.random_time) for r in runs])),
        "pipeline_wins": sum(r.win for r in runs),
        "seeds": cfg.seeds,
    }
    text = json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n"
    (out / "summary.json").write_text(text)
    return summary


def _clean(o):
    """Replace non-finite floats by None so the summary is strict JSON."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, float) and not math.isfinite(o):
        return None
    return o
