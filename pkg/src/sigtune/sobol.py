"""Unscrambled Sobol sequence (Gray-code construction, Joe-Kuo direction numbers).

Points are generated one at a time so that a sampler position can be stored as
a plain integer and resumed later.  ``sobol_point(dim, i)`` is a pure function
of its arguments; ``SobolState`` just walks ``i`` forward.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DimensionMismatch, DimensionUnsupported

BITS = 52
MAX_DIM = 50

# new-joe-kuo-6.21201, dimensions 2..50: (degree s, coefficients a, initial m_1..m_s)
_JOE_KUO = (
    (1, 0, (1,)), (2, 1, (1, 3)), (3, 1, (1, 3, 1)),
    (3, 2, (1, 1, 1)), (4, 1, (1, 1, 3, 3)), (4, 4, (1, 3, 5, 13)),
    (5, 2, (1, 1, 5, 5, 17)), (5, 4, (1, 1, 5, 5, 5)), (5, 7, (1, 1, 7, 11, 19)),
    (5, 11, (1, 1, 5, 1, 1)), (5, 13, (1, 1, 1, 3, 11)), (5, 14, (1, 3, 5, 5, 31)),
    (6, 1, (1, 3, 3, 9, 7, 49)), (6, 13, (1, 1, 1, 15, 21, 21)), (6, 16, (1, 3, 1, 13, 27, 49)),
    (6, 19, (1, 1, 1, 15, 7, 5)), (6, 22, (1, 3, 1, 15, 13, 25)), (6, 25, (1, 1, 5, 5, 19, 61)),
    (7, 1, (1, 3, 7, 11, 23, 15, 103)), (7, 4, (1, 3, 7, 13, 13, 15, 69)), (7, 7, (1, 1, 3, 13, 7, 35, 63)),
    (7, 8, (1, 3, 5, 9, 1, 25, 53)), (7, 14, (1, 3, 1, 13, 9, 35, 107)), (7, 19, (1, 3, 1, 5, 27, 61, 31)),
    (7, 21, (1, 1, 5, 11, 19, 41, 61)), (7, 28, (1, 3, 5, 3, 3, 13, 69)), (7, 31, (1, 1, 7, 13, 1, 19, 1)),
    (7, 32, (1, 3, 7, 5, 13, 19, 59)), (7, 37, (1, 1, 3, 9, 25, 29, 41)), (7, 41, (1, 3, 5, 13, 23, 1, 55)),
    (7, 42, (1, 3, 7, 3, 13, 59, 17)), (7, 50, (1, 3, 1, 3, 5, 53, 69)), (7, 55, (1, 1, 5, 5, 23, 33, 13)),
    (7, 56, (1, 1, 7, 7, 1, 61, 123)), (7, 59, (1, 1, 7, 9, 13, 61, 49)), (7, 62, (1, 3, 3, 5, 3, 55, 33)),
    (8, 14, (1, 3, 1, 15, 31, 13, 49, 245)), (8, 21, (1, 3, 5, 15, 31, 59, 63, 97)), (8, 22, (1, 3, 1, 11, 11, 11, 77, 249)),
    (8, 38, (1, 3, 1, 11, 27, 43, 71, 9)), (8, 47, (1, 1, 7, 15, 21, 11, 81, 45)), (8, 49, (1, 3, 7, 3, 25, 31, 65, 79)),
    (8, 50, (1, 3, 1, 1, 19, 11, 3, 205)), (8, 52, (1, 1, 5, 9, 19, 21, 29, 157)), (8, 56, (1, 3, 7, 11, 1, 33, 89, 185)),
    (8, 67, (1, 3, 3, 3, 15, 9, 79, 71)), (8, 70, (1, 3, 7, 11, 15, 39, 119, 27)), (8, 84, (1, 1, 3, 1, 11, 31, 97, 225)),
    (8, 97, (1, 1, 1, 3, 23, 43, 57, 177)),
)


@lru_cache(maxsize=None)
def direction_numbers(dim: int) -> np.ndarray:
    """Integer direction numbers ``v[j, k]`` scaled by ``2**BITS``."""
    if not 1 <= dim <= MAX_DIM:
        raise DimensionUnsupported(f"Sobol dimension {dim} not in [1, {MAX_DIM}]")
    v = np.zeros((dim, BITS), dtype=np.uint64)
    for k in range(BITS):
        v[0, k] = 1 << (BITS - 1 - k)
    for j in range(1, dim):
        s, a, m = _JOE_KUO[j - 1]
        mk = list(m)
        for k in range(s, BITS):
            new = mk[k - s] ^ (mk[k - s] << s)
            for i in range(1, s):
                if (a >> (s - 1 - i)) & 1:
                    new ^= mk[k - i] << i
            mk.append(new)
        for k in range(BITS):
            v[j, k] = mk[k] << (BITS - 1 - k)
    v.flags.writeable = False
    return v


def sobol_point(dim: int, index: int) -> np.ndarray:
    """Point ``index`` (0-based, Gray-code order) of the ``dim``-dimensional sequence."""
    if index < 0:
        raise ValueError("index must be non-negative")
    v = direction_numbers(dim)
    gray = index ^ (index >> 1)
    acc = np.zeros(dim, dtype=np.uint64)
    k = 0
    while gray:
        if gray & 1:
            acc ^= v[:, k]
        gray >>= 1
        k += 1
    return acc.astype(float) / float(1 << BITS)


def sobol_block(dim: int, start: int, count: int) -> np.ndarray:
    """``count`` consecutive points starting at ``start`` as a ``(count, dim)`` array."""
    v = direction_numbers(dim)
    out = np.empty((count, dim))
    if count == 0:
        return out
    gray = start ^ (start >> 1)
    acc = np.zeros(dim, dtype=np.uint64)
    k = 0
    while gray:
        if gray & 1:
            acc ^= v[:, k]
        gray >>= 1
        k += 1
    scale = float(1 << BITS)
    out[0] = acc / scale
    for row, i in enumerate(range(start + 1, start + count), start=1):
        # Gray-code step: flip the direction number of the lowest zero bit of i-1
        c = ((i - 1) ^ i).bit_length() - 1
        acc ^= v[:, c]
        out[row] = acc / scale
    return out


@dataclass
class SobolState:
    dimension: int
    index: int = 0

    def __post_init__(self):
        if not 1 <= self.dimension <= MAX_DIM:
            raise DimensionUnsupported(f"Sobol dimension {self.dimension} not in [1, {MAX_DIM}]")

    def next(self) -> np.ndarray:
        point = sobol_point(self.dimension, self.index)
        self.index += 1
        return point


def sobol_next(state: SobolState) -> np.ndarray:
    return state.next()


def sample_config(state: SobolState, space):
    """Draw the next Sobol point and decode it over ``space``'s free dimensions."""
    if state.dimension != space.d_free:
        raise DimensionMismatch(
            f"sampler dimension {state.dimension} != free dimensions {space.d_free}"
        )
    return space.decode(state.next())
