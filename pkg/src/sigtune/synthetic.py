"""Deterministic synthetic workloads standing in for cluster jobs.

Cost model over the encoded configuration ``u`` (one coordinate per parameter)::

    cost = base + sum_i w_i g(u_i; m_i)          # designated influential dims
                + w_minor * sum_j g(u_j; m_j)    # every other dim, tiny weight
                + w_int * g(u_a) * g(u_b)        # interaction of the two heaviest dims
                + N(0, (noise_fraction * noiseless_cost)^2)

with ``g(u; m) = ((u - m) / max(m, 1 - m))**2`` in ``[0, 1]``.  Every minimiser
``m`` is the canonical encoding of an actual parameter value, so the global
optimum configuration is known and its noiseless cost is exactly ``base``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import DimensionMismatch
from .space import ConfigSpace, Configuration, example_space


def bowl(u, m):
    u = np.asarray(u, dtype=float)
    m = np.asarray(m, dtype=float)
    return ((u - m) / np.maximum(m, 1.0 - m)) ** 2


@dataclass(frozen=True)
class SyntheticWorkload:
    name: str
    space: ConfigSpace
    influential: Mapping[str, float]  # name -> weight, heaviest first
    optimum: Mapping[str, Any]  # full optimum configuration
    base: float = 100.0
    noise_fraction: float = 0.0
    minor_weight: float = 0.2
    interaction_weight: float = 0.0
    _m: np.ndarray = field(init=False, repr=False, compare=False)
    _w: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.space.fixed:
            raise ValueError("synthetic workloads are defined over an unfixed space")
        if self.base <= 0:
            raise ValueError("base cost must be positive")
        names = self.space.names
        object.__setattr__(self, "_m", self.space.encode(self.optimum))
        w = np.full(len(names), self.minor_weight)
        for n, wt in self.influential.items():
            w[names.index(n)] = wt
        object.__setattr__(self, "_w", w)

    @property
    def dimension(self) -> int:
        return len(self.space.params)

    @property
    def designated(self) -> list[str]:
        return list(self.influential)

    @property
    def optimum_cost(self) -> float:
        return self.base

    @property
    def cost_range(self) -> float:
        """Spread between the worst and best noiseless cost."""
        return float(self._w.sum() + self.interaction_weight)

    def with_noise(self, noise_fraction: float) -> "SyntheticWorkload":
        return SyntheticWorkload(
            self.name, self.space, dict(self.influential), dict(self.optimum),
            self.base, noise_fraction, self.minor_weight, self.interaction_weight,
        )

    def noiseless_encoded(self, U) -> np.ndarray:
        """Vectorised noiseless cost for rows of encoded points over all parameters."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[1] != self.dimension:
            raise DimensionMismatch(f"expected {self.dimension} coordinates, got {U.shape[1]}")
        g = bowl(U, self._m)
        cost = self.base + g @ self._w
        if self.interaction_weight:
            a, b = (self.space.names.index(n) for n in list(self.influential)[:2])
            cost = cost + self.interaction_weight * g[:, a] * g[:, b]
        return cost

    def noiseless(self, config: Configuration) -> float:
        return float(self.noiseless_encoded(self.space.encode(config))[0])


def _noise_rng(u: np.ndarray, noise_seed) -> np.random.Generator:
    digest = hashlib.sha256(np.round(u, 12).tobytes()).digest()
    key = [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]
    seeds = list(noise_seed) if isinstance(noise_seed, (tuple, list)) else [noise_seed]
    return np.random.default_rng([int(s) for s in seeds] + key)


def eval_synthetic(wl: SyntheticWorkload, config: Configuration, noise_seed=0) -> float:
    """Cost in seconds of running ``config`` on ``wl``; deterministic in (config, noise_seed)."""
    u = wl.space.encode(config)
    clean = float(wl.noiseless_encoded(u)[0])
    if wl.noise_fraction <= 0:
        return clean
    noise = _noise_rng(u, noise_seed).normal(0.0, wl.noise_fraction * clean)
    return max(clean + noise, 1e-6 * clean)


def _optimum(space: ConfigSpace, chosen: Mapping[str, Any]) -> dict:
    # non-designated parameters are optimal at their declared default
    return {p.name: chosen.get(p.name, p.default) for p in space.params}


def memory_dominated(space: ConfigSpace | None = None, noise_fraction: float = 0.0) -> SyntheticWorkload:
    """Two heavy memory parameters dominate the cost."""
    space = space or example_space()
    influential = {"spark.executor.memory": 80.0, "spark.memory.fraction": 60.0}
    best = {"spark.executor.memory": 14000, "spark.memory.fraction": 0.84}
    return SyntheticWorkload(
        "memory", space, influential, _optimum(space, best),
        base=100.0, noise_fraction=noise_fraction, minor_weight=0.3, interaction_weight=10.0,
    )


def balanced(space: ConfigSpace | None = None, noise_fraction: float = 0.0) -> SyntheticWorkload:
    """Six moderately influential parameters of similar weight."""
    space = space or example_space()
    influential = {
        "spark.executor.cores": 30.0,
        "spark.executor.memory": 28.0,
        "spark.default.parallelism": 26.0,
        "spark.memory.fraction": 24.0,
        "spark.reducer.maxSizeInFlight": 22.0,
        "spark.sql.shuffle.partitions": 20.0,
    }
    best = {
        "spark.executor.cores": 8,
        "spark.executor.memory": 14000,
        "spark.default.parallelism": 10,
        "spark.memory.fraction": 0.84,
        "spark.reducer.maxSizeInFlight": 96,
        "spark.sql.shuffle.partitions": 12,
    }
    return SyntheticWorkload(
        "balanced", space, influential, _optimum(space, best),
        base=100.0, noise_fraction=noise_fraction, minor_weight=0.3, interaction_weight=6.0,
    )


def near_flat(space: ConfigSpace | None = None, noise_fraction: float = 0.0) -> SyntheticWorkload:
    """One heavy parameter over an otherwise almost flat surface."""
    space = space or example_space()
    influential = {"spark.default.parallelism": 40.0}
    best = {"spark.default.parallelism": 400}
    return SyntheticWorkload(
        "flat", space, influential, _optimum(space, best),
        base=100.0, noise_fraction=noise_fraction, minor_weight=0.2,
    )


SUITE = {"memory": memory_dominated, "balanced": balanced, "flat": near_flat}


def make_workload(name: str, noise_fraction: float = 0.0, space: ConfigSpace | None = None) -> SyntheticWorkload:
    try:
        factory = SUITE[name]
    except KeyError:
        raise ValueError(f"unknown synthetic workload {name!r}; choose from {sorted(SUITE)}") from None
    return factory(space, noise_fraction)
