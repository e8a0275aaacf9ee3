"""Bagged CART regression forest and impurity-decrease (Gini) importance.

Written for the tiny sample counts of the sensitivity rounds (n ~ 10) as well
as the ~100-sample ground-truth fits.  Tree growth runs in a numba kernel;
split ties go to the lowest feature index, then the lowest threshold, which
keeps fits bit-reproducible for a given seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NonFiniteCost, TooFewSamples

MIN_SAMPLES = 4


@dataclass(frozen=True)
class ForestHyper:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # None -> ceil(d / 3)

    def mtry(self, d: int) -> int:
        if self.features_per_split is None:
            return max(1, math.ceil(d / 3))
        return max(1, min(self.features_per_split, d))


@dataclass(frozen=True)
class Tree:
    feature: np.ndarray  # -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray  # weighted variance reduction of each split node

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            n = node[idx]
            go_left = X[idx, self.feature[n]] <= self.threshold[n]
            node[idx] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    @property
    def n_splits(self) -> int:
        return int((self.feature >= 0).sum())


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    hyper: ForestHyper
    seed: int
    n_features: int
    oob_error: float
    feature_names: tuple[str, ...] | None = None

    def predict(self, X) -> np.ndarray | float:
        X = np.asarray(X, dtype=float)
        single = X.ndim == 1
        X2 = np.atleast_2d(X)
        if X2.shape[1] != self.n_features:
            raise DimensionMismatch(f"expected width {self.n_features}, got {X2.shape[1]}")
        pred = np.mean([t.predict(X2) for t in self.trees], axis=0)
        return float(pred[0]) if single else pred


@dataclass(frozen=True)
class ImportanceVector:
    names: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def as_dict(self) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    def ranked(self) -> list[str]:
        """Names by descending importance; ties keep declaration order."""
        order = sorted(range(len(self.names)), key=lambda i: (-self.values[i], i))
        return [self.names[i] for i in order]


@njit(cache=True)
def _grow_kernel(X, y, mtry, min_leaf, max_depth, seed):
    """Grow one CART regression tree; returns flat node arrays.

    Nodes own contiguous slices of ``idx``, partitioned in place.  Candidate
    features are scanned in ascending order and a split only replaces the
    incumbent on a strictly larger score, so ties resolve to the lowest
    feature index and then the lowest threshold.
    """
    np.random.seed(seed)
    n, d = X.shape
    cap = 2 * n + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    gain = np.zeros(cap)
    idx = np.arange(n)
    s_node = np.empty(cap, dtype=np.int64)
    s_start = np.empty(cap, dtype=np.int64)
    s_end = np.empty(cap, dtype=np.int64)
    s_depth = np.empty(cap, dtype=np.int64)
    perm = np.arange(d)
    feats = np.empty(mtry, dtype=np.int64)
    vals = np.empty(n)
    ys = np.empty(n)
    tmp = np.empty(n, dtype=np.int64)

    value[0] = y.mean()
    n_nodes = 1
    sp = 0
    s_node[0], s_start[0], s_end[0], s_depth[0] = 0, 0, n, 0
    sp = 1
    while sp > 0:
        sp -= 1
        node, start, end, depth = s_node[sp], s_start[sp], s_end[sp], s_depth[sp]
        m = end - start
        if m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue
        tot = 0.0
        sq = 0.0
        y0 = y[idx[start]]
        constant = True
        for i in range(start, end):
            yi = y[idx[i]]
            tot += yi
            sq += yi * yi
            if yi != y0:
                constant = False
        if constant:
            continue
        for i in range(mtry):
            j = i + int(np.random.random() * (d - i))
            perm[i], perm[j] = perm[j], perm[i]
        feats[:] = np.sort(perm[:mtry])
        best_score = -np.inf
        best_f = -1
        best_thr = 0.0
        for f in feats:
            for i in range(m):
                vals[i] = X[idx[start + i], f]
            order = np.argsort(vals[:m], kind="mergesort")
            for i in range(m):
                ys[i] = y[idx[start + order[i]]]
            cs = 0.0
            for p in range(m - 1):
                cs += ys[p]
                nl = p + 1
                if nl < min_leaf or m - nl < min_leaf:
                    continue
                lo = vals[order[p]]
                hi = vals[order[p + 1]]
                if not hi > lo:
                    continue
                score = cs * cs / nl + (tot - cs) * (tot - cs) / (m - nl)
                if score > best_score:
                    best_score = score
                    best_f = f
                    best_thr = 0.5 * (lo + hi)
        if best_f < 0:
            continue
        g = best_score - tot * tot / m
        if not g > 1e-12 * max(1.0, sq):
            continue
        # stable partition of the node slice
        nl = 0
        for i in range(start, end):
            if X[idx[i], best_f] <= best_thr:
                tmp[nl] = idx[i]
                nl += 1
        k = nl
        for i in range(start, end):
            if not X[idx[i], best_f] <= best_thr:
                tmp[k] = idx[i]
                k += 1
        for i in range(m):
            idx[start + i] = tmp[i]
        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = g
        for child, cs_, ce_ in ((n_nodes, start, start + nl), (n_nodes + 1, start + nl, end)):
            acc = 0.0
            for i in range(cs_, ce_):
                acc += y[idx[i]]
            value[child] = acc / (ce_ - cs_)
        left[node] = n_nodes
        right[node] = n_nodes + 1
        # right pushed first so the left subtree is grown first
        s_node[sp], s_start[sp], s_end[sp], s_depth[sp] = n_nodes + 1, start + nl, end, depth + 1
        sp += 1
        s_node[sp], s_start[sp], s_end[sp], s_depth[sp] = n_nodes, start, start + nl, depth + 1
        sp += 1
        n_nodes += 2
    return (
        feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
        right[:n_nodes].copy(), value[:n_nodes].copy(), gain[:n_nodes].copy(),
    )


def _grow_tree(X, y, hyper: ForestHyper, seed: int) -> Tree:
    max_depth = -1 if hyper.max_depth is None else hyper.max_depth
    arrays = _grow_kernel(
        np.ascontiguousarray(X), np.ascontiguousarray(y), hyper.mtry(X.shape[1]),
        hyper.min_samples_leaf, max_depth, seed,
    )
    return Tree(*arrays)


def fit(X, y, hyper: ForestHyper | None = None, seed: int = 0, feature_names=None) -> ForestModel:
    """Fit a bootstrap-bagged regression forest on encoded samples ``X`` and costs ``y``."""
    hyper = hyper or ForestHyper()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch(f"X shape {X.shape} incompatible with y shape {y.shape}")
    n, d = X.shape
    if n < MIN_SAMPLES:
        raise TooFewSamples(f"need at least {MIN_SAMPLES} samples, got {n}")
    if not np.all(np.isfinite(y)) or np.any(y <= 0):
        raise NonFiniteCost("costs must be finite and positive")
    if feature_names is not None and len(feature_names) != d:
        raise DimensionMismatch("feature_names length does not match X width")

    trees = []
    oob_sum = np.zeros(n)
    oob_cnt = np.zeros(n)
    for child in np.random.SeedSequence(seed).spawn(hyper.n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        tree = _grow_tree(X[boot], y[boot], hyper, int(rng.integers(0, 2**31 - 1)))
        trees.append(tree)
        oob = np.ones(n, dtype=bool)
        oob[boot] = False
        if oob.any():
            oob_sum[oob] += tree.predict(X[oob])
            oob_cnt[oob] += 1
    seen = oob_cnt > 0
    if seen.any():
        pred = oob_sum[seen] / oob_cnt[seen]
        oob_error = float(np.mean(np.abs(pred - y[seen]) / y[seen]))
    else:
        oob_error = float("nan")
    return ForestModel(
        trees=tuple(trees),
        hyper=hyper,
        seed=seed,
        n_features=d,
        oob_error=oob_error,
        feature_names=tuple(feature_names) if feature_names is not None else None,
    )


def predict(model: ForestModel, x):
    return model.predict(x)


def gini_importance(model: ForestModel) -> ImportanceVector:
    """Total split gain per feature over the forest, normalised to sum to one.

    Returns all zeros when no tree made a split (e.g. constant target).
    """
    total = np.zeros(model.n_features)
    for t in model.trees:
        split = t.feature >= 0
        np.add.at(total, t.feature[split], t.gain[split])
    s = total.sum()
    values = total / s if s > 0 else total
    names = model.feature_names or tuple(f"x{i}" for i in range(model.n_features))
    return ImportanceVector(names=tuple(names), values=values)
