"""Evaluation metrics: RFE ground truth, weighted significance error, search time."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from . import forest
from .errors import DegenerateInput, TooFewSamples
from .space import ConfigSpace

HIGH_WEIGHT = 0.8
LOW_WEIGHT = 0.2
DEFAULT_TOP_K = 6
DEFAULT_HIGH_THRESHOLD = 0.10
RFE_MIN_SAMPLES = 50


@dataclass(frozen=True)
class GroundTruth:
    importance: forest.ImportanceVector  # all-feature forest, normalised
    top_k: tuple[str, ...]  # RFE survivors, most important first
    high_set: frozenset[str]
    low_set: frozenset[str]
    test_error: float  # mean relative error on the held-out split


def rfe_ground_truth(
    X,
    y,
    k: int = DEFAULT_TOP_K,
    names: Sequence[str] | None = None,
    seed: int = 0,
    hyper: forest.ForestHyper | None = None,
    test_fraction: float = 0.2,
    high_threshold: float = DEFAULT_HIGH_THRESHOLD,
) -> GroundTruth:
    """Recursive feature elimination with the regression forest.

    Drops the least important remaining dimension one at a time until ``k``
    remain.  Survivors whose normalised importance in the all-feature forest is
    at least ``high_threshold`` are high-influence, the rest low-influence.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = X.shape
    if n < RFE_MIN_SAMPLES:
        raise TooFewSamples(f"RFE needs at least {RFE_MIN_SAMPLES} samples, got {n}")
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in [1, {d}]")
    names = tuple(names) if names is not None else tuple(f"x{i}" for i in range(d))
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    test, train = perm[:n_test], perm[n_test:]

    active = list(range(d))
    full = forest.fit(X[train], y[train], hyper, seed=seed, feature_names=names)
    full_imp = forest.gini_importance(full)
    if n_test:
        pred = full.predict(X[test])
        test_error = float(np.mean(np.abs(pred - y[test]) / y[test]))
    else:
        test_error = float("nan")

    imp = full_imp.values
    step = 0
    while len(active) > k:
        # lowest importance goes first; ties drop the later-declared dimension
        worst = min(range(len(active)), key=lambda i: (imp[i], -active[i]))
        del active[worst]
        if len(active) == k:
            break
        step += 1
        sub = forest.fit(X[train][:, active], y[train], hyper, seed=seed + step)
        imp = forest.gini_importance(sub).values
    if len(active) < d:
        final = forest.fit(X[train][:, active], y[train], hyper, seed=seed + step + 1)
        imp = forest.gini_importance(final).values
    order = sorted(range(len(active)), key=lambda i: (-imp[i], active[i]))
    top = tuple(names[active[i]] for i in order)
    high = frozenset(n for n in top if full_imp[n] >= high_threshold)
    return GroundTruth(full_imp, top, high, frozenset(top) - high, test_error)


def weighted_s_error(detected: Iterable[str], truth: GroundTruth) -> float:
    """0.8 * (share of high-influence missed) + 0.2 * (share of low-influence missed)."""
    if not truth.top_k:
        raise ValueError("ground truth has an empty top-k set")
    found = set(detected)
    miss_high = len(truth.high_set - found) / max(len(truth.high_set), 1)
    miss_low = len(truth.low_set - found) / max(len(truth.low_set), 1)
    return HIGH_WEIGHT * miss_high + LOW_WEIGHT * miss_low


def coefficient_of_variation(costs: Sequence[float]) -> float:
    costs = np.asarray(costs, dtype=float)
    if costs.size < 2:
        raise DegenerateInput("need at least two costs")
    mean = costs.mean()
    if not mean > 0:
        raise DegenerateInput("mean cost must be positive")
    return float(costs.std(ddof=1) / mean)


def _cost(obs) -> float:
    return float(obs["cost"] if isinstance(obs, dict) else getattr(obs, "cost", obs))


def _overhead(obs) -> float:
    if isinstance(obs, dict):
        return float(obs.get("overhead", 0.0))
    return float(getattr(obs, "overhead", 0.0))


def search_time_to_within(history, optimum_cost: float, frac: float = 0.05) -> float | None:
    """Cumulative time up to the first execution within ``frac`` of the optimum.

    Returns ``None`` when no execution qualifies.
    """
    if not optimum_cost > 0:
        raise ValueError("optimum_cost must be positive")
    target = (1.0 + frac) * optimum_cost
    total = 0.0
    for obs in history:
        c = _cost(obs)
        total += c + _overhead(obs)
        if c <= target:
            return total
    return None


def cumulative_time_series(history) -> list[tuple[int, float]]:
    out = []
    total = 0.0
    for i, obs in enumerate(history, start=1):
        total += _cost(obs)
        out.append((i, total))
    return out


def crossover_index(series: Sequence[tuple[int, float]], baseline_cost: float) -> int | None:
    """First execution index where the tuned cumulative time beats ``baseline_cost * index``."""
    for i, cum in series:
        if cum < baseline_cost * i:
            return i
    return None


@dataclass(frozen=True)
class BaselineObservation:
    config: dict
    cost: float


def random_search_baseline(
    space: ConfigSpace, workload: Callable[[dict, int], float], budget: int, seed: int = 0
) -> list[BaselineObservation]:
    """Evaluate ``budget`` uniformly random configurations; ``workload(config, i)`` returns a cost."""
    if budget < 1:
        raise ValueError("budget must be at least 1")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(budget):
        u = rng.random(space.d_free)
        config = space.decode(u)
        out.append(BaselineObservation(config, float(workload(config, i))))
    return out


def best_so_far(costs: Sequence[float]) -> np.ndarray:
    return np.minimum.accumulate(np.asarray(costs, dtype=float))


def percentiles(values: Sequence[float], qs=(10, 50, 90)) -> dict[str, float]:
    v = np.asarray([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return {f"p{q}": float("nan") for q in qs}
    return {f"p{q}": float(np.percentile(v, q)) for q in qs}


# -- report files -----------------------------------------------------------

CSV_HEADER = ("index", "cost_seconds", "cumulative_seconds", "phase")


def history_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    total = 0.0
    for i, obs in enumerate(history, start=1):
        c = _cost(obs)
        total += c
        phase = obs.get("phase", "") if isinstance(obs, dict) else getattr(obs, "phase", "")
        w.writerow([i, f"{c:.6f}", f"{total:.6f}", phase])
    return buf.getvalue()


def summary_json(
    history, optimum_cost: float | None = None, s_error: float | None = None, cv_per_round=None
) -> str:
    costs = [_cost(o) for o in history]
    doc = {
        "best_cost": min(costs) if costs else None,
        "search_time_to_5pct": (
            search_time_to_within(history, optimum_cost, 0.05) if optimum_cost else None
        ),
        "s_error": s_error,
        "cv_per_round": list(cv_per_round) if cv_per_round is not None else [],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
