"""Per-workload tuning lifecycle: significance analysis, GP tuning, convergence.

A ``WorkloadProfile`` is an immutable snapshot; ``report_execution`` and
``reset_for_retune`` return new snapshots.  ``next_configuration`` is a pure
read: the GP proposal for the next run is computed when the previous result is
reported, so replaying a profile's history through ``report_execution``
rebuilds exactly the same state.
"""

from __future__ import annotations

import contextlib
import dataclasses
import fcntl
import hashlib
import json
import logging
import math
import os
import tempfile
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import gp
from .acquisition import TuningState, propose_next, should_stop
from .errors import (
    CorruptProfile,
    InsufficientData,
    NonFiniteCost,
    PhaseMismatch,
    PhaseMismatchWarning,
    SchemaMismatch,
)
from .forest import ForestHyper
from .sensitivity import SAState, sa_next_config, sa_report, sa_result
from .sobol import sobol_point
from .space import ConfigSpace, Configuration

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SA, TUNING, CONVERGED = "SA", "Tuning", "Converged"
RETUNE, FAILED = "retune", "failed"
DEGRADATION_DROP = 0.20


@dataclass(frozen=True)
class TunerSettings:
    alpha: float = 0.6
    n_per_round: int = 10
    n_rounds: int = 2
    n_start: int = 3
    max_evals: int = 15
    min_evals_before_stop: int = 10
    ei_rel_threshold: float = 0.10
    n_draws: int = 10
    burn_in: int = gp.BURN_IN
    hyper_mode: str = "mcmc"  # or "map"
    degradation_window: int = 10
    top_k_cap: int | None = None

    def __post_init__(self):
        if self.hyper_mode not in ("mcmc", "map"):
            raise ValueError("hyper_mode must be 'mcmc' or 'map'")

    @property
    def sa_budget(self) -> int:
        return self.n_rounds * self.n_per_round


@dataclass(frozen=True)
class Observation:
    config: dict
    cost: float
    phase: str
    seq: int
    timestamp: float
    throughput: float | None = None
    epoch: int = 0
    overhead: float = 0.0


@dataclass(frozen=True)
class Proposal:
    config: dict
    ei: float
    x: tuple


@dataclass(frozen=True)
class WorkloadProfile:
    workload_id: str
    space: ConfigSpace
    settings: TunerSettings = field(default_factory=TunerSettings)
    seed: int = 0
    phase: str = SA
    sa: SAState | None = None
    tuning: TuningState | None = None
    proposal: Proposal | None = None
    significant: tuple = ()
    history: tuple = ()
    best: tuple | None = None  # (config, cost)
    throughput_log: tuple = ()  # (timestamp, units/sec)
    epoch: int = 0
    events: tuple = ()  # (history length, "retune" | "failed") in the order they happened
    skips: int = 0  # failed runs in the current tuning phase
    converged_at: int | None = None  # throughput_log length at convergence
    pending: dict | None = None  # configuration handed out by the last suggest
    schema_version: int = SCHEMA_VERSION

    @property
    def n_observations(self) -> int:
        return len(self.history)

    @property
    def retune_marks(self) -> tuple:
        return tuple(n for n, kind in self.events if kind == RETUNE)

    @property
    def active_space(self) -> ConfigSpace:
        if self.phase == SA and self.sa is not None:
            return self.sa.current_space
        if self.tuning is not None:
            return self.tuning.reduced_space
        return self.space


def new_profile(workload_id: str, space: ConfigSpace, settings: TunerSettings | None = None, seed: int = 0):
    settings = settings or TunerSettings()
    return WorkloadProfile(
        workload_id=workload_id,
        space=space,
        settings=settings,
        seed=seed,
        sa=_fresh_sa(space, settings, seed, epoch=0),
    )


def _fresh_sa(space: ConfigSpace, settings: TunerSettings, seed: int, epoch: int) -> SAState:
    return SAState(
        current_space=space,
        round_remaining=settings.n_rounds,
        n_per_round=settings.n_per_round,
        alpha=settings.alpha,
        seed=_derive_seed(seed, epoch, "sa"),
        top_k_cap=settings.top_k_cap,
    )


def _derive_seed(*parts) -> int:
    digest = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(digest[:4], "little")


# -- suggestion --------------------------------------------------------------


def next_configuration(profile: WorkloadProfile) -> Configuration:
    """Configuration to run next; never mutates the profile."""
    if profile.phase == SA:
        if profile.sa is None:
            raise CorruptProfile("SA phase without SA state")
        return sa_next_config(profile.sa)
    if profile.phase == TUNING:
        t = profile.tuning
        if t is None:
            raise CorruptProfile("Tuning phase without tuning state")
        if t.n_obs < t.n_start:
            return _start_point(t, t.n_obs + 1 + profile.skips)
        if profile.proposal is None:
            return _propose(profile, t)[0].config
        return dict(profile.proposal.config)
    if profile.phase == CONVERGED:
        if profile.best is None:
            raise CorruptProfile("converged profile without a best configuration")
        return dict(profile.best[0])
    raise CorruptProfile(f"unknown phase {profile.phase!r}")


def suggest(profile: WorkloadProfile) -> tuple[Configuration, WorkloadProfile]:
    """``next_configuration`` plus remembering it for mismatch checks on report."""
    config = next_configuration(profile)
    if profile.phase == CONVERGED:
        return config, profile
    return config, dataclasses.replace(profile, pending=config)


def _posteriors(profile: WorkloadProfile, t: TuningState):
    s = profile.settings
    seed = _derive_seed(profile.seed, profile.epoch, "gp", t.n_obs)
    X, y = t.X, t.y
    if s.hyper_mode == "map":
        hypers = [gp.fit_map(X, y, seed=seed)]
    else:
        hypers = gp.sample_hyperparameters(X, y, s.n_draws, seed=seed, burn_in=s.burn_in)
    posts = []
    for h in hypers:
        try:
            posts.append(gp.fit_posterior(X, y, h))
        except Exception as exc:  # a draw that cannot be factorised is skipped
            log.debug("skipping hyperparameter draw: %s", exc)
    if not posts:
        posts.append(gp.fit_posterior(X, y, gp.GPHyper.default(X.shape[1])))
    return posts


def _propose(profile: WorkloadProfile, t: TuningState) -> tuple[Proposal, float]:
    posts = _posteriors(profile, t)
    seed = _derive_seed(profile.seed, profile.epoch, "cand", t.n_obs)
    config, ei, x = propose_next(t, posts, seed)
    return Proposal(config, ei, tuple(float(v) for v in x)), ei


# -- reporting ---------------------------------------------------------------


def report_execution(
    profile: WorkloadProfile,
    config: Configuration,
    cost: float,
    throughput: float | None = None,
    timestamp: float | None = None,
    overhead: float = 0.0,
) -> WorkloadProfile:
    """Record one execution and advance the phase machine."""
    try:
        cost = float(cost)
    except (TypeError, ValueError):
        raise NonFiniteCost(f"cost {cost!r} is not a number") from None
    if not (math.isfinite(cost) and cost > 0):
        raise NonFiniteCost(f"cost must be finite and positive, got {cost!r}")
    if throughput is not None and not (math.isfinite(throughput) and throughput >= 0):
        raise ValueError("throughput must be finite and non-negative")
    config = {p.name: p.canonical(config[p.name]) for p in profile.space.params if p.name in config}
    profile.space.encode(config)  # completeness and domain check
    if profile.pending is not None and config != profile.pending:
        warnings.warn(
            f"{profile.workload_id}: reported configuration differs from the last suggestion",
            PhaseMismatchWarning,
            stacklevel=2,
        )
    ts = time.time() if timestamp is None else float(timestamp)
    obs = Observation(
        config=dict(config),
        cost=cost,
        phase=profile.phase,
        seq=len(profile.history) + 1,
        timestamp=ts,
        throughput=throughput,
        epoch=profile.epoch,
        overhead=float(overhead),
    )
    best = profile.best
    if best is None or cost < best[1]:
        best = (dict(config), cost)
    tlog = profile.throughput_log + (((ts, float(throughput)),) if throughput is not None else ())
    p = dataclasses.replace(
        profile, history=profile.history + (obs,), best=best, throughput_log=tlog, pending=None
    )

    if p.phase == SA:
        if p.sa.current_space.in_geometry(config):
            sa = sa_report(p.sa, config, cost)
            p = dataclasses.replace(p, sa=sa)
            if sa.complete:
                significant, reduced = sa_result(sa)
                s = p.settings
                tuning = TuningState(
                    reduced_space=reduced,
                    n_start=s.n_start,
                    max_evals=s.max_evals,
                    min_evals_before_stop=s.min_evals_before_stop,
                    ei_rel_threshold=s.ei_rel_threshold,
                )
                p = dataclasses.replace(
                    p, phase=TUNING, tuning=tuning, significant=tuple(significant), skips=0
                )
        else:
            log.info("%s: off-geometry configuration kept in history only", p.workload_id)
    elif p.phase == TUNING:
        t = p.tuning
        if t.reduced_space.in_geometry(config):
            t = t.add(t.reduced_space.encode(config), cost)
            proposal = None
            if t.n_obs >= t.max_evals:
                t = dataclasses.replace(t, stopped=True)
            elif t.n_obs >= t.n_start:
                proposal, ei = _propose(p, t)
                t = dataclasses.replace(t, last_ei=ei)
                if should_stop(t):
                    t = dataclasses.replace(t, stopped=True)
                    proposal = None
            p = dataclasses.replace(p, tuning=t, proposal=proposal)
            if t.stopped:
                p = dataclasses.replace(p, phase=CONVERGED, converged_at=len(p.throughput_log))
        else:
            log.info("%s: off-geometry configuration kept in history only", p.workload_id)
    return p


def _start_point(t: TuningState, index: int) -> Configuration:
    return t.reduced_space.decode(sobol_point(t.reduced_space.d_free, index))


def mark_failed(profile: WorkloadProfile) -> WorkloadProfile:
    """Record that the suggested run failed; the next suggestion moves on.

    Failed runs carry no cost.  In SA the Sobol index advances; in tuning the
    next start point (or, once the GP is active, the next unused Sobol point
    over the reduced space) replaces the failed proposal.
    """
    p = dataclasses.replace(
        profile, events=profile.events + ((len(profile.history), FAILED),), pending=None
    )
    if p.phase == SA:
        return dataclasses.replace(p, sa=dataclasses.replace(p.sa, sobol_index=p.sa.sobol_index + 1))
    if p.phase == TUNING:
        t = p.tuning
        skips = p.skips + 1
        proposal = None
        if t.n_obs >= t.n_start:
            config = _start_point(t, t.n_start + skips)
            x = t.reduced_space.encode(config)
            proposal = Proposal(config, 0.0, tuple(float(v) for v in x))
        return dataclasses.replace(p, skips=skips, proposal=proposal)
    return p


# -- degradation and retuning ------------------------------------------------


def throughput_dropped(baseline, trailing, drop: float = DEGRADATION_DROP) -> bool:
    return float(np.mean(trailing)) < (1.0 - drop) * float(np.mean(baseline))


def detect_degradation(profile: WorkloadProfile, window: int | None = None) -> bool:
    """True when the trailing throughput window fell more than 20% below the baseline.

    The baseline is the first ``window`` throughput entries logged once the
    profile converged (i.e. runs of the tuned configuration).
    """
    window = window or profile.settings.degradation_window
    if profile.phase != CONVERGED:
        raise PhaseMismatch("degradation is only tracked for converged workloads")
    since = [v for _, v in profile.throughput_log[profile.converged_at or 0 :]]
    if len(since) < window:
        raise InsufficientData(f"need {window} post-convergence throughput entries, have {len(since)}")
    return throughput_dropped(since[:window], since[-window:])


def reset_for_retune(profile: WorkloadProfile) -> WorkloadProfile:
    if profile.phase != CONVERGED:
        raise PhaseMismatch(f"cannot retune from phase {profile.phase}")
    epoch = profile.epoch + 1
    return dataclasses.replace(
        profile,
        phase=SA,
        sa=_fresh_sa(profile.space, profile.settings, profile.seed, epoch),
        tuning=None,
        proposal=None,
        significant=(),
        epoch=epoch,
        events=profile.events + ((len(profile.history), RETUNE),),
        skips=0,
        converged_at=None,
        pending=None,
    )


def replay(profile: WorkloadProfile) -> WorkloadProfile:
    """Rebuild a profile from scratch by feeding its history back in order."""
    p = new_profile(profile.workload_id, profile.space, profile.settings, profile.seed)
    pending = list(profile.events)

    def apply_events(p, at):
        while pending and pending[0][0] == at:
            _, kind = pending.pop(0)
            p = reset_for_retune(p) if kind == RETUNE else mark_failed(p)
        return p

    for i, obs in enumerate(profile.history):
        p = apply_events(p, i)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PhaseMismatchWarning)
            p = report_execution(p, obs.config, obs.cost, obs.throughput, obs.timestamp, obs.overhead)
    return apply_events(p, len(profile.history))


# -- persistence -------------------------------------------------------------


def _space_to_json(space: ConfigSpace | None):
    return None if space is None else space.to_dict()


def _sa_to_json(sa: SAState | None):
    if sa is None:
        return None
    return {
        "fixed": dict(sa.current_space.fixed),
        "round_remaining": sa.round_remaining,
        "n_per_round": sa.n_per_round,
        "alpha": sa.alpha,
        "samples_this_round": sa.samples_this_round,
        "round_observations": [[list(x), c] for x, c in sa.round_observations],
        "round_importances": [dict(d) for d in sa.round_importances],
        "round_oob_errors": list(sa.round_oob_errors),
        "sobol_index": sa.sobol_index,
        "seed": sa.seed,
        "forest_hyper": dataclasses.asdict(sa.forest_hyper),
        "top_k_cap": sa.top_k_cap,
    }


def _sa_from_json(d, space: ConfigSpace):
    if d is None:
        return None
    return SAState(
        current_space=ConfigSpace(space.params, d["fixed"]),
        round_remaining=d["round_remaining"],
        n_per_round=d["n_per_round"],
        alpha=d["alpha"],
        samples_this_round=d["samples_this_round"],
        round_observations=tuple((tuple(x), c) for x, c in d["round_observations"]),
        round_importances=tuple(dict(r) for r in d["round_importances"]),
        round_oob_errors=tuple(d["round_oob_errors"]),
        sobol_index=d["sobol_index"],
        seed=d["seed"],
        forest_hyper=ForestHyper(**d["forest_hyper"]),
        top_k_cap=d["top_k_cap"],
    )


def _tuning_to_json(t: TuningState | None):
    if t is None:
        return None
    return {
        "fixed": dict(t.reduced_space.fixed),
        "observations": [[list(x), c] for x, c in t.observations],
        "n_start": t.n_start,
        "max_evals": t.max_evals,
        "min_evals_before_stop": t.min_evals_before_stop,
        "ei_rel_threshold": t.ei_rel_threshold,
        "last_ei": t.last_ei,
        "stopped": t.stopped,
    }


def _tuning_from_json(d, space: ConfigSpace):
    if d is None:
        return None
    return TuningState(
        reduced_space=ConfigSpace(space.params, d["fixed"]),
        observations=tuple((tuple(x), c) for x, c in d["observations"]),
        n_start=d["n_start"],
        max_evals=d["max_evals"],
        min_evals_before_stop=d["min_evals_before_stop"],
        ei_rel_threshold=d["ei_rel_threshold"],
        last_ei=d["last_ei"],
        stopped=d["stopped"],
    )


def profile_to_dict(p: WorkloadProfile) -> dict:
    return {
        "schema_version": p.schema_version,
        "workload_id": p.workload_id,
        "space": _space_to_json(p.space),
        "settings": dataclasses.asdict(p.settings),
        "seed": p.seed,
        "phase": p.phase,
        "sa": _sa_to_json(p.sa),
        "tuning": _tuning_to_json(p.tuning),
        "proposal": None if p.proposal is None else dataclasses.asdict(p.proposal) | {"x": list(p.proposal.x)},
        "significant": list(p.significant),
        "history": [dataclasses.asdict(o) for o in p.history],
        "best": None if p.best is None else {"config": p.best[0], "cost": p.best[1]},
        "throughput_log": [list(e) for e in p.throughput_log],
        "epoch": p.epoch,
        "events": [list(e) for e in p.events],
        "skips": p.skips,
        "converged_at": p.converged_at,
        "pending": p.pending,
    }


def profile_from_dict(d: dict) -> WorkloadProfile:
    version = d.get("schema_version")
    if not isinstance(version, int):
        raise CorruptProfile("profile has no schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMismatch(f"profile schema {version}, this build reads {SCHEMA_VERSION}")
    try:
        space = ConfigSpace.from_dict(d["space"])
        prop = d["proposal"]
        return WorkloadProfile(
            workload_id=d["workload_id"],
            space=space,
            settings=TunerSettings(**d["settings"]),
            seed=d["seed"],
            phase=d["phase"],
            sa=_sa_from_json(d["sa"], space),
            tuning=_tuning_from_json(d["tuning"], space),
            proposal=None if prop is None else Proposal(prop["config"], prop["ei"], tuple(prop["x"])),
            significant=tuple(d["significant"]),
            history=tuple(Observation(**o) for o in d["history"]),
            best=None if d["best"] is None else (d["best"]["config"], d["best"]["cost"]),
            throughput_log=tuple(tuple(e) for e in d["throughput_log"]),
            epoch=d["epoch"],
            events=tuple((int(n), str(k)) for n, k in d["events"]),
            skips=d["skips"],
            converged_at=d["converged_at"],
            pending=d["pending"],
            schema_version=version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptProfile(f"malformed profile: {exc}") from exc


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_profile(profile: WorkloadProfile, path: str | Path) -> Path:
    """Atomically write ``profile`` as JSON (temp file, fsync, rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = profile_to_dict(profile)
    doc = dict(payload, checksum=_checksum(payload))
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
    return path


def load_profile(path: str | Path) -> WorkloadProfile:
    try:
        text = Path(path).read_text()
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptProfile(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CorruptProfile(f"{path}: top level is not an object")
    version = doc.get("schema_version")
    if isinstance(version, int) and version != SCHEMA_VERSION:
        raise SchemaMismatch(f"profile schema {version}, this build reads {SCHEMA_VERSION}")
    checksum = doc.pop("checksum", None)
    if checksum != _checksum(doc):
        raise CorruptProfile(f"{path}: checksum mismatch")
    return profile_from_dict(doc)


def profile_path(state_dir: str | Path, workload_id: str) -> Path:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in workload_id)
    return Path(state_dir) / f"{safe}.json"


@contextlib.contextmanager
def profile_lock(path: str | Path):
    """Advisory exclusive lock serialising writers of one profile."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path.with_name(path.name + ".lock"), "w") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            yield
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def profiles_equal(a: WorkloadProfile, b: WorkloadProfile) -> bool:
    return profile_to_dict(a) == profile_to_dict(b)


def state_fingerprint(p: WorkloadProfile) -> dict[str, Any]:
    """Phase-machine state compared by replay checks (excludes transient fields)."""
    d = profile_to_dict(p)
    return {k: d[k] for k in ("phase", "sa", "tuning", "proposal", "significant", "best", "epoch")}


def report_and_check(profile: WorkloadProfile, config, cost, throughput=None, timestamp=None, overhead=0.0):
    """``report_execution`` followed by the degradation check on converged workloads.

    Returns ``(profile, retuned)``; a detected drop resets the profile to SA.
    """
    p = report_execution(profile, config, cost, throughput, timestamp, overhead)
    if p.phase == CONVERGED and throughput is not None:
        try:
            if detect_degradation(p):
                log.warning("%s: throughput dropped by more than %d%%, re-tuning", p.workload_id, DEGRADATION_DROP * 100)
                return reset_for_retune(p), True
        except InsufficientData:
            pass
    return p, False


class ProfileStore:
    """Profiles under ``state_dir``; every mutation holds the per-profile lock."""

    def __init__(self, state_dir: str | Path):
        self.state_dir = Path(state_dir)

    def path(self, workload_id: str) -> Path:
        return profile_path(self.state_dir, workload_id)

    def exists(self, workload_id: str) -> bool:
        return self.path(workload_id).exists()

    def load(self, workload_id: str) -> WorkloadProfile:
        return load_profile(self.path(workload_id))

    def save(self, profile: WorkloadProfile) -> Path:
        return save_profile(profile, self.path(profile.workload_id))

    def lock(self, workload_id: str):
        return profile_lock(self.path(workload_id))

    def load_or_create(self, workload_id, space=None, settings=None, seed=0) -> WorkloadProfile:
        if self.exists(workload_id):
            return self.load(workload_id)
        if space is None:
            raise FileNotFoundError(f"no profile for {workload_id!r} and no space given to create one")
        return new_profile(workload_id, space, settings, seed)

    def suggest(self, workload_id, space=None, settings=None, seed=0) -> tuple[Configuration, WorkloadProfile]:
        with self.lock(workload_id):
            p = self.load_or_create(workload_id, space, settings, seed)
            config, p2 = suggest(p)
            if p2 is not p or not self.exists(workload_id):
                self.save(p2)
            return config, p2

    def report(self, workload_id, cost, config=None, throughput=None, overhead=0.0, timestamp=None):
        with self.lock(workload_id):
            p = self.load(workload_id)
            if config is None:
                if p.pending is not None:
                    config = p.pending
                elif p.phase == CONVERGED and p.best is not None:
                    config = p.best[0]
                else:
                    raise PhaseMismatch(f"{workload_id}: nothing suggested yet; pass the configuration explicitly")
            p, retuned = report_and_check(p, config, cost, throughput, timestamp, overhead)
            self.save(p)
            return p, retuned

    def mark_failed(self, workload_id: str) -> WorkloadProfile:
        with self.lock(workload_id):
            p = mark_failed(self.load(workload_id))
            self.save(p)
            return p
