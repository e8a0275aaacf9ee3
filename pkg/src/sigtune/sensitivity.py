"""Incremental significance analysis over repeated workload executions.

Each round collects ``n_per_round`` Sobol-sampled executions over the parameters
that are still free, fits a random forest on them, keeps the
``ceil(alpha * d_free)`` most important parameters and pins the rest to their
midpoint.  After ``n_rounds`` rounds the surviving parameters are the
significant set handed to the GP tuner.

State transitions are pure: ``sa_report`` returns a new ``SAState``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import forest
from .errors import NonFiniteCost, SAComplete, SAIncomplete, ValueOutOfDomain
from .sobol import sobol_point
from .space import ConfigSpace, Configuration

DEFAULT_ALPHA = 0.6
DEFAULT_N_PER_ROUND = 10
DEFAULT_N_ROUNDS = 2


def keep_count(alpha: float, d: int) -> int:
    # guard against 0.6 * 30 = 18.000000000000004 style round-up
    return max(1, math.ceil(alpha * d - 1e-9))


@dataclass(frozen=True)
class SAState:
    current_space: ConfigSpace
    round_remaining: int = DEFAULT_N_ROUNDS
    n_per_round: int = DEFAULT_N_PER_ROUND
    alpha: float = DEFAULT_ALPHA
    samples_this_round: int = 0
    round_observations: tuple = ()  # (encoded x over current free dims, cost)
    round_importances: tuple = ()  # one {name: importance} per completed round
    round_oob_errors: tuple = ()
    sobol_index: int = 1  # index 0 is the all-lower-bounds corner
    seed: int = 0
    forest_hyper: forest.ForestHyper = field(default_factory=forest.ForestHyper)
    top_k_cap: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.n_per_round < forest.MIN_SAMPLES:
            raise ValueError(f"n_per_round must be >= {forest.MIN_SAMPLES}")
        if self.round_remaining < 0:
            raise ValueError("round_remaining must be non-negative")

    @property
    def complete(self) -> bool:
        return self.round_remaining == 0

    @property
    def d_free(self) -> int:
        return self.current_space.d_free


def sa_next_config(state: SAState) -> Configuration:
    """Configuration for the next SA execution; does not advance any counter."""
    if state.complete:
        raise SAComplete("significance analysis already finished")
    return state.current_space.decode(sobol_point(state.d_free, state.sobol_index))


def _round_seed(state: SAState) -> int:
    done = len(state.round_importances)
    return int(np.random.SeedSequence((state.seed, done)).generate_state(1)[0])


def sa_report(state: SAState, config: Configuration, cost: float) -> SAState:
    """Record one execution; closes the round when ``n_per_round`` samples are in."""
    if state.complete:
        raise SAComplete("significance analysis already finished")
    if not (math.isfinite(cost) and cost > 0):
        raise NonFiniteCost(f"cost must be finite and positive, got {cost!r}")
    space = state.current_space
    if not space.in_geometry(config):
        raise ValueOutOfDomain("configuration does not honour the fixed parameters of this round")
    x = space.encode(config)
    obs = state.round_observations + ((tuple(float(v) for v in x), float(cost)),)
    state = dataclasses.replace(
        state,
        round_observations=obs,
        samples_this_round=state.samples_this_round + 1,
        sobol_index=state.sobol_index + 1,
    )
    if state.samples_this_round < state.n_per_round:
        return state
    return _close_round(state)


def _close_round(state: SAState) -> SAState:
    space = state.current_space
    X = np.array([o[0] for o in state.round_observations])
    y = np.array([o[1] for o in state.round_observations])
    model = forest.fit(X, y, state.forest_hyper, seed=_round_seed(state), feature_names=space.free_names)
    imp = forest.gini_importance(model)
    keep = set(imp.ranked()[: keep_count(state.alpha, space.d_free)])
    drop = [n for n in space.free_names if n not in keep]
    full = {n: 0.0 for n in space.names}
    full.update(imp.as_dict())
    return dataclasses.replace(
        state,
        current_space=space.fix_to_midpoint(drop),
        round_remaining=state.round_remaining - 1,
        samples_this_round=0,
        round_observations=(),
        round_importances=state.round_importances + (full,),
        round_oob_errors=state.round_oob_errors + (model.oob_error,),
    )


def sa_result(state: SAState) -> tuple[list[str], ConfigSpace]:
    """Significant parameters (descending final-round importance) and the reduced space."""
    if not state.complete:
        raise SAIncomplete(f"{state.round_remaining} SA round(s) still to run")
    space = state.current_space
    if state.round_importances:
        last = state.round_importances[-1]
        names = space.free_names
        significant = sorted(names, key=lambda n: (-last[n], names.index(n)))
    else:
        significant = space.free_names
    if state.top_k_cap is not None and len(significant) > state.top_k_cap:
        space = space.fix_to_midpoint(significant[state.top_k_cap:])
        significant = significant[: state.top_k_cap]
    return significant, space
