"""Running external workloads: placeholder substitution and wall-clock timing."""

from __future__ import annotations

import logging
import math
import os
import re
import shlex
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ExecutionTimeout, NonZeroExit, SpawnFailure, UnknownParam
from .space import ConfigSpace

log = logging.getLogger(__name__)

PLACEHOLDER = re.compile(r"\{\{\s*([^{}\s]+)\s*\}\}")
ENV_PREFIX = "SIGTUNE_"


def render_value(value) -> str:
    """Canonical text form: ints bare, booleans lower-case, floats to 6 significant digits."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def env_name(param: str) -> str:
    return ENV_PREFIX + re.sub(r"[^A-Za-z0-9]", "_", param).upper()


@dataclass(frozen=True)
class CommandTemplate:
    argv: tuple[str, ...]
    env_mode: bool = False  # also export every parameter as SIGTUNE_<PARAM>
    cwd: str | None = None
    timeout: float = 3600.0
    extra_env: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "argv", tuple(self.argv))
        if not self.argv:
            raise ValueError("command template is empty")
        if not (self.timeout > 0 and math.isfinite(self.timeout)):
            raise ValueError("timeout must be a positive number of seconds")

    @property
    def placeholders(self) -> list[str]:
        return [m.group(1) for arg in self.argv for m in PLACEHOLDER.finditer(arg)]

    def validate(self, space: ConfigSpace) -> None:
        names = set(space.names)
        for ph in self.placeholders:
            if ph not in names:
                raise UnknownParam(f"placeholder {{{{{ph}}}}} is not a parameter of the space")

    def render(self, config: Mapping) -> list[str]:
        def sub(m):
            try:
                return render_value(config[m.group(1)])
            except KeyError:
                raise UnknownParam(f"no value for placeholder {m.group(1)!r}") from None

        return [PLACEHOLDER.sub(sub, arg) for arg in self.argv]

    def environment(self, config: Mapping) -> dict[str, str]:
        env = dict(os.environ)
        env.update(self.extra_env)
        if self.env_mode:
            env.update({env_name(k): render_value(v) for k, v in config.items()})
        return env


@dataclass(frozen=True)
class ExitMeta:
    argv: tuple[str, ...]
    returncode: int
    log_path: str | None
    started: float


def run_external(
    tpl: CommandTemplate, config: Mapping, log_dir: str | Path | None = None, tag: str = "run"
) -> tuple[float, ExitMeta]:
    """Run the rendered command once and return its wall-clock duration in seconds.

    Failed runs (spawn error, non-zero status, timeout) raise and report no cost.
    """
    argv = tpl.render(config)
    env = tpl.environment(config)
    log_path = None
    sink = subprocess.DEVNULL
    if log_dir is not None:
        Path(log_dir).mkdir(parents=True, exist_ok=True)
        log_path = Path(log_dir) / f"{tag}.log"
        sink = open(log_path, "wb")
    started = time.time()
    try:
        t0 = time.perf_counter()
        try:
            proc = subprocess.Popen(argv, stdout=sink, stderr=subprocess.STDOUT, cwd=tpl.cwd, env=env)
        except OSError as exc:
            raise SpawnFailure(f"cannot start {argv[0]!r}: {exc}") from exc
        try:
            rc = proc.wait(timeout=tpl.timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
            raise ExecutionTimeout(f"{argv[0]!r} exceeded {tpl.timeout:g}s") from None
        cost = time.perf_counter() - t0
    finally:
        if log_path is not None:
            sink.close()
    if rc != 0:
        raise NonZeroExit(rc, f"{argv[0]!r} exited with status {rc}")
    log.debug("ran %s in %.3fs", argv, cost)
    return cost, ExitMeta(tuple(argv), rc, None if log_path is None else str(log_path), started)


def parse_command(words: Sequence[str], **kwargs) -> CommandTemplate:
    """Template from CLI words; a single word containing spaces is split shell-style."""
    words = list(words)
    if len(words) == 1 and " " in words[0]:
        words = shlex.split(words[0])
    return CommandTemplate(tuple(words), **kwargs)
