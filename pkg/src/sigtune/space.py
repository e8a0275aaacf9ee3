"""Parameter universe, unit-hypercube encoding and the fixed-value overlay.

Every tunable parameter is mapped onto one coordinate of ``[0, 1]``.  Only the
*free* parameters (those not in ``ConfigSpace.fixed``) get a coordinate, in
declaration order.  Discrete parameters use equal-width buckets and encode to
their bucket centre, so ``decode(encode(c)) == c`` holds exactly for them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    SpaceValidationError,
    UnknownParam,
    ValueOutOfDomain,
)

KINDS = ("continuous", "integer", "categorical", "boolean")
SCALES = ("linear", "log")

Configuration = dict  # name -> value, one entry per parameter


@dataclass(frozen=True)
class Violation:
    code: str
    message: str


@dataclass(frozen=True)
class ParameterSpec:
    """One tunable parameter.

    ``low``/``high`` are used by continuous and integer parameters, ``levels``
    by categorical and boolean ones (booleans default to ``(False, True)``).
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    levels: tuple = ()
    default: Any = None
    scale: str = "linear"

    def __post_init__(self):
        if self.kind == "boolean" and not self.levels:
            object.__setattr__(self, "levels", (False, True))
        else:
            object.__setattr__(self, "levels", tuple(self.levels))

    @property
    def is_numeric(self) -> bool:
        return self.kind in ("continuous", "integer")

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def contains(self, value) -> bool:
        if self.kind == "continuous":
            if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
                return False
            return math.isfinite(value) and self.low <= value <= self.high
        if self.kind == "integer":
            if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
                return False
            return float(value).is_integer() and self.low <= value <= self.high
        if self.kind == "boolean":
            return isinstance(value, (bool, np.bool_)) and value in self.levels
        try:
            self._level_index(value)
        except ValueError:
            return False
        return True

    def canonical(self, value):
        """Coerce ``value`` to the Python type used for this parameter."""
        if self.kind == "continuous":
            return float(value)
        if self.kind == "integer":
            return int(value)
        if self.kind == "boolean":
            return bool(value)
        return self.levels[self._level_index(value)]

    # -- unit-interval mapping -------------------------------------------

    def decode(self, u: float):
        if not 0.0 <= u <= 1.0:
            raise ValueOutOfDomain(f"{self.name}: coordinate {u!r} outside [0, 1]")
        if self.kind == "continuous":
            if self.scale == "log":
                lo, hi = math.log(self.low), math.log(self.high)
                return float(min(max(math.exp(lo + u * (hi - lo)), self.low), self.high))
            return float(self.low + u * (self.high - self.low))
        if self.kind == "integer":
            low, high = int(self.low), int(self.high)
            if self.scale == "log":
                lo, hi = math.log(low), math.log(high + 1)
                v = math.floor(math.exp(lo + u * (hi - lo)))
            else:
                v = math.floor(low + u * (high - low + 1))
            return int(min(max(v, low), high))
        idx = min(int(math.floor(u * self.n_levels)), self.n_levels - 1)
        return self.levels[idx]

    def encode(self, value) -> float:
        if not self.contains(value):
            raise ValueOutOfDomain(f"{self.name}: {value!r} outside domain")
        if self.kind == "continuous":
            if self.scale == "log":
                lo, hi = math.log(self.low), math.log(self.high)
                return (math.log(value) - lo) / (hi - lo)
            return (value - self.low) / (self.high - self.low)
        if self.kind == "integer":
            low, high, v = int(self.low), int(self.high), int(value)
            if self.scale == "log":
                lo, hi = math.log(low), math.log(high + 1)
                a = (math.log(v) - lo) / (hi - lo)
                b = (math.log(v + 1) - lo) / (hi - lo)
                return 0.5 * (a + b)
            return (v - low + 0.5) / (high - low + 1)
        return (self._level_index(value) + 0.5) / self.n_levels

    def midpoint(self):
        """Value used when the parameter is fixed as non-influential."""
        if self.kind == "continuous":
            if self.scale == "log":
                return float(math.sqrt(self.low * self.high))
            return float((self.low + self.high) / 2)
        if self.kind == "integer":
            centre = math.sqrt(self.low * self.high) if self.scale == "log" else (self.low + self.high) / 2
            return int(math.floor(centre + 0.5))
        return self.default

    def _level_index(self, value) -> int:
        for i, lv in enumerate(self.levels):
            if lv == value and isinstance(lv, bool) == isinstance(value, (bool, np.bool_)):
                return i
        raise ValueError(f"{value!r} is not a level of {self.name}")

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.is_numeric:
            d["range"] = [self.low, self.high]
            if self.scale != "linear":
                d["scale"] = self.scale
        elif self.kind == "categorical":
            d["levels"] = list(self.levels)
        d["default"] = self.default
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ParameterSpec":
        kind = d.get("kind")
        low = high = None
        if "range" in d:
            low, high = d["range"]
        return cls(
            name=d["name"],
            kind=kind,
            low=low,
            high=high,
            levels=tuple(d.get("levels", ())),
            default=d.get("default"),
            scale=d.get("scale", "linear"),
        )


@dataclass(frozen=True)
class ConfigSpace:
    params: tuple[ParameterSpec, ...]
    fixed: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "fixed", dict(self.fixed))

    @property
    def names(self) -> list[str]:
        return [p.name for p in self.params]

    @property
    def free_params(self) -> list[ParameterSpec]:
        return [p for p in self.params if p.name not in self.fixed]

    @property
    def free_names(self) -> list[str]:
        return [p.name for p in self.free_params]

    @property
    def d_free(self) -> int:
        return len(self.params) - len(self.fixed)

    def param(self, name: str) -> ParameterSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise UnknownParam(name)

    def default_config(self) -> Configuration:
        return {p.name: self.fixed.get(p.name, p.default) for p in self.params}

    def decode(self, u: Sequence[float]) -> Configuration:
        """Map a point of ``[0, 1]^d_free`` to a full configuration."""
        u = np.asarray(u, dtype=float).ravel()
        free = self.free_params
        if u.shape[0] != len(free):
            raise DimensionMismatch(f"expected {len(free)} coordinates, got {u.shape[0]}")
        out = {}
        coords = iter(u)
        for p in self.params:
            if p.name in self.fixed:
                out[p.name] = self.fixed[p.name]
            else:
                out[p.name] = p.decode(float(next(coords)))
        return out

    def encode(self, config: Mapping[str, Any]) -> np.ndarray:
        """Map a configuration to its canonical point over the free dimensions."""
        missing = [n for n in self.names if n not in config]
        if missing:
            raise ValueOutOfDomain(f"configuration missing parameters: {missing}")
        return np.array([p.encode(config[p.name]) for p in self.free_params], dtype=float)

    def canonicalize(self, u: Sequence[float]) -> np.ndarray:
        """Snap a unit-cube point onto the encoding of the configuration it decodes to."""
        return self.encode(self.decode(u))

    def in_geometry(self, config: Mapping[str, Any]) -> bool:
        """True when ``config`` honours every fixed value of this space."""
        return all(config.get(n) == v for n, v in self.fixed.items())

    def fix_to_midpoint(self, names: Iterable[str]) -> "ConfigSpace":
        names = list(names)
        known = set(self.names)
        for n in names:
            if n not in known:
                raise UnknownParam(n)
            if n in self.fixed:
                raise ValueError(f"parameter {n!r} is already fixed")
        fixed = dict(self.fixed)
        for n in names:
            fixed[n] = self.param(n).midpoint()
        return ConfigSpace(self.params, fixed)

    def unfixed(self) -> "ConfigSpace":
        return ConfigSpace(self.params, {})

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"parameters": [p.to_dict() for p in self.params]}
        if self.fixed:
            d["fixed"] = dict(self.fixed)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ConfigSpace":
        if "parameters" not in d or not isinstance(d["parameters"], list):
            raise SpaceValidationError([Violation("Malformed", "missing top-level 'parameters' array")])
        try:
            params = tuple(ParameterSpec.from_dict(p) for p in d["parameters"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SpaceValidationError([Violation("Malformed", f"bad parameter entry: {exc}")]) from exc
        space = cls(params, dict(d.get("fixed", {})))
        check_space(space)
        return space


def validate_space(space: ConfigSpace) -> list[Violation]:
    """Return every invariant violation in ``space``; empty list when valid."""
    out: list[Violation] = []
    seen: set[str] = set()
    for p in space.params:
        if p.name in seen:
            out.append(Violation("DuplicateName", f"parameter {p.name!r} declared twice"))
        seen.add(p.name)
        if p.kind not in KINDS:
            out.append(Violation("UnknownKind", f"{p.name}: kind {p.kind!r}"))
            continue
        if p.is_numeric:
            if p.low is None or p.high is None or not p.low < p.high:
                out.append(Violation("EmptyDomain", f"{p.name}: range [{p.low}, {p.high}] is empty"))
                continue
            if p.kind == "integer" and not (float(p.low).is_integer() and float(p.high).is_integer()):
                out.append(Violation("EmptyDomain", f"{p.name}: integer range needs integer bounds"))
                continue
            if p.scale not in SCALES:
                out.append(Violation("InvalidScale", f"{p.name}: scale {p.scale!r}"))
            elif p.scale == "log" and p.low <= 0:
                out.append(Violation("InvalidScale", f"{p.name}: log scale requires low > 0"))
        elif p.n_levels < 2:
            out.append(Violation("EmptyDomain", f"{p.name}: needs at least 2 levels"))
            continue
        if not p.contains(p.default):
            out.append(Violation("DefaultOutOfDomain", f"{p.name}: default {p.default!r}"))
    by_name = {p.name: p for p in space.params}
    for n, v in space.fixed.items():
        if n not in by_name:
            out.append(Violation("FixedUnknownParam", f"fixed parameter {n!r} not declared"))
        elif by_name[n].kind in KINDS and not by_name[n].contains(v):
            out.append(Violation("FixedOutOfDomain", f"{n}: fixed value {v!r}"))
    if len(space.params) - len(space.fixed) < 1:
        out.append(Violation("NoFreeDimensions", "every parameter is fixed"))
    return out


def check_space(space: ConfigSpace) -> ConfigSpace:
    violations = validate_space(space)
    if violations:
        raise SpaceValidationError(violations)
    return space


def load_space(path: str | Path) -> ConfigSpace:
    with open(path) as fh:
        return ConfigSpace.from_dict(json.load(fh))


def example_space() -> ConfigSpace:
    """Illustrative 30-parameter Spark-like space bundled with the package."""
    return load_space(Path(__file__).with_name("data") / "spark_space.json")
