"""Expected improvement, candidate-sweep proposal and the stopping rule."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from .errors import DimensionMismatch, NotEnoughObservations
from .gp import GPPosterior
from .sobol import sobol_block
from .space import ConfigSpace, Configuration

N_SOBOL_CANDIDATES = 1024
N_LOCAL_CANDIDATES = 32
LOCAL_SIGMA = 0.05
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_UPPER = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class TuningState:
    reduced_space: ConfigSpace
    observations: tuple = ()  # (encoded x over reduced free dims, cost)
    n_start: int = 3
    max_evals: int = 15
    min_evals_before_stop: int = 10
    ei_rel_threshold: float = 0.10
    last_ei: float | None = None
    stopped: bool = False

    def __post_init__(self):
        if self.n_start > self.max_evals:
            raise ValueError("n_start must not exceed max_evals")

    @property
    def n_obs(self) -> int:
        return len(self.observations)

    @property
    def X(self) -> np.ndarray:
        return np.array([o[0] for o in self.observations], dtype=float).reshape(self.n_obs, -1)

    @property
    def y(self) -> np.ndarray:
        return np.array([o[1] for o in self.observations], dtype=float)

    @property
    def best_cost(self) -> float | None:
        return min(o[1] for o in self.observations) if self.observations else None

    def add(self, x: Sequence[float], cost: float) -> "TuningState":
        obs = self.observations + ((tuple(float(v) for v in x), float(cost)),)
        return dataclasses.replace(self, observations=obs)


def expected_improvement(mean, variance, best):
    """Minimisation EI; vectorised over ``mean``/``variance``, always >= 0."""
    mean = np.asarray(mean, dtype=float)
    sigma = np.sqrt(np.maximum(np.asarray(variance, dtype=float), 0.0))
    diff = best - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sigma > 0, diff / np.where(sigma > 0, sigma, 1.0), 0.0)
    ei = diff * ndtr(z) + sigma * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    ei = np.where(sigma > 0, ei, np.maximum(diff, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def ei_marginalized(x, posteriors: Sequence[GPPosterior], best: float):
    """EI averaged over hyperparameter draws; ``x`` may be one point or a matrix."""
    if not posteriors:
        raise ValueError("need at least one posterior")
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    X = np.atleast_2d(X)
    d = posteriors[0].X_train.shape[1]
    if X.shape[1] != d:
        raise DimensionMismatch(f"expected {d} coordinates, got {X.shape[1]}")
    total = np.zeros(X.shape[0])
    for post in posteriors:
        m, v = post.predict(X)
        total += expected_improvement(m, v, best)
    total /= len(posteriors)
    return float(total[0]) if single else total


def candidate_set(state: TuningState, seed: int) -> np.ndarray:
    """Sobol sweep over the reduced space plus a Gaussian cloud around the incumbent.

    Every candidate is snapped to the canonical encoding of the configuration
    it decodes to, so discrete parameters are scored where they will be run.
    """
    space = state.reduced_space
    d = space.d_free
    sweep = sobol_block(d, 1, N_SOBOL_CANDIDATES)
    parts = [sweep]
    if state.observations:
        incumbent = np.asarray(state.observations[int(np.argmin(state.y))][0])
        rng = np.random.default_rng(seed)
        local = incumbent + rng.normal(0.0, LOCAL_SIGMA, size=(N_LOCAL_CANDIDATES, d))
        parts.append(np.clip(local, 0.0, _UPPER))
    cands = np.vstack(parts)
    return np.array([space.canonicalize(u) for u in cands])


def propose_next(state: TuningState, posteriors: Sequence[GPPosterior], seed: int = 0):
    """Highest-EI candidate as ``(configuration, ei, encoded point)``; ties -> lowest index."""
    if state.n_obs < state.n_start:
        raise NotEnoughObservations(f"need {state.n_start} observations, have {state.n_obs}")
    if state.stopped:
        raise RuntimeError("tuning has already stopped")
    cands = candidate_set(state, seed)
    ei = ei_marginalized(cands, posteriors, state.best_cost)
    k = int(np.argmax(ei))
    x = cands[k]
    return state.reduced_space.decode(x), float(ei[k]), x


def should_stop(state: TuningState, best: float | None = None) -> bool:
    """Budget exhausted, or past the minimum and the relative EI fell below threshold."""
    n = state.n_obs
    if n >= state.max_evals:
        return True
    if n < state.min_evals_before_stop or state.last_ei is None:
        return False
    best = state.best_cost if best is None else best
    return state.last_ei / best < state.ei_rel_threshold
