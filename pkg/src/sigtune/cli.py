"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

from . import evalkit, experiments
from . import manager as mgr
from .errors import ExecutionError, SigtuneError, SpawnFailure
from .executor import parse_command, run_external
from .space import ConfigSpace, example_space, load_space
from .synthetic import SUITE, eval_synthetic, make_workload

log = logging.getLogger("sigtune")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
MAX_CONSECUTIVE_SPAWN_FAILURES = 3
DEFAULT_STATE_DIR = ".sigtune"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common() -> argparse.ArgumentParser:
    # SUPPRESS lets the same flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--state-dir", default=argparse.SUPPRESS, help="profile directory (env SIGTUNE_STATE_DIR)")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for every stochastic step")
    p.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    p.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="sigtune", description="Significance-aware configuration tuner.", parents=[common])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("suggest", parents=[common], help="print the next configuration to run")
    s.add_argument("--workload", required=True)
    s.add_argument("--space", help="space JSON file, or 'example' for the bundled 30-parameter space")

    r = sub.add_parser("report", parents=[common], help="record the cost of the last suggested run")
    r.add_argument("--workload", required=True)
    r.add_argument("--cost", type=float, help="execution time in seconds")
    r.add_argument("--throughput", type=float, help="processed units per second")
    r.add_argument("--config", help="JSON configuration actually run (defaults to the last suggestion)")
    r.add_argument("--failed", action="store_true", help="the suggested run failed; record no cost")

    st = sub.add_parser("status", parents=[common], help="show a profile without modifying it")
    st.add_argument("--workload", required=True)

    t = sub.add_parser("tune", parents=[common], help="closed loop: suggest, run, report")
    t.add_argument("--workload", required=True)
    t.add_argument("--space")
    t.add_argument("--budget", type=int, default=35, help="maximum executions in this invocation")
    t.add_argument("--synthetic", choices=sorted(SUITE), help="evaluate a synthetic workload instead of a command")
    t.add_argument("--noise", type=float, default=0.02, help="synthetic noise fraction")
    t.add_argument("--timeout", type=float, default=3600.0)
    t.add_argument("--env-mode", action="store_true", help="also export parameters as SIGTUNE_<PARAM>")
    t.add_argument("--out-dir", help="report directory (default <state-dir>/reports/<workload>)")
    t.add_argument("cmd", nargs=argparse.REMAINDER, help="-- command template with {{param}} placeholders")

    sim = sub.add_parser("simulate", parents=[common], help="run the synthetic acceptance experiments")
    sim.add_argument("--seeds", type=int, default=10)
    sim.add_argument("--out-dir", required=True)
    sim.add_argument("--noise", type=float, default=0.02)
    sim.add_argument("--suite", nargs="+", choices=sorted(SUITE), default=list(SUITE))
    sim.add_argument("--horizon", type=int, default=100)

    v = sub.add_parser("sa-validate", parents=[common], help="significance-recovery error on synthetic workloads")
    v.add_argument("--workload", nargs="+", choices=sorted(SUITE), default=list(SUITE))
    v.add_argument("--seeds", type=int, default=10)
    v.add_argument("--noise", type=float, default=0.02)
    return parser


def _opts(ns):
    state_dir = getattr(ns, "state_dir", None) or os.environ.get("SIGTUNE_STATE_DIR") or DEFAULT_STATE_DIR
    return Path(state_dir), getattr(ns, "seed", 0), getattr(ns, "format", "json")


def _space_arg(value: str | None) -> ConfigSpace | None:
    if value is None:
        return None
    if value == "example":
        return example_space()
    return load_space(value)


def _emit(obj, fmt="json"):
    if fmt == "csv" and isinstance(obj, dict):
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(list(obj))
        w.writerow([json.dumps(v) if isinstance(v, (dict, list)) else v for v in obj.values()])
    else:
        print(json.dumps(obj, indent=2, sort_keys=True))


def _summary(p: mgr.WorkloadProfile) -> dict:
    counts = {ph: 0 for ph in (mgr.SA, mgr.TUNING, mgr.CONVERGED)}
    for o in p.history:
        counts[o.phase] += 1
    return {
        "workload": p.workload_id,
        "phase": p.phase,
        "observations": len(p.history),
        "observations_by_phase": counts,
        "best_cost": None if p.best is None else p.best[1],
        "best_config": None if p.best is None else p.best[0],
        "significant": list(p.significant),
        "free_dimensions": p.active_space.d_free,
        "epoch": p.epoch,
        "throughput_entries": len(p.throughput_log),
    }


def cmd_suggest(ns) -> int:
    state_dir, seed, fmt = _opts(ns)
    store = mgr.ProfileStore(state_dir)
    space = _space_arg(ns.space) if not store.exists(ns.workload) else None
    config, _ = store.suggest(ns.workload, space, seed=seed)
    _emit(config, fmt)
    return EXIT_OK


def cmd_report(ns) -> int:
    state_dir, _, fmt = _opts(ns)
    store = mgr.ProfileStore(state_dir)
    if ns.failed == (ns.cost is not None):
        raise UsageError("give exactly one of --cost or --failed")
    config = json.loads(ns.config) if ns.config else None
    if ns.failed:
        p = store.mark_failed(ns.workload)
        _emit(_summary(p), fmt)
        return EXIT_OK
    p, retuned = store.report(ns.workload, ns.cost, config=config, throughput=ns.throughput)
    out = _summary(p)
    out["retune_triggered"] = retuned
    _emit(out, fmt)
    return EXIT_OK


def cmd_status(ns) -> int:
    state_dir, _, fmt = _opts(ns)
    p = mgr.ProfileStore(state_dir).load(ns.workload)
    if fmt == "csv":
        sys.stdout.write(evalkit.history_csv(p.history))
    else:
        _emit(_summary(p))
    return EXIT_OK


def cmd_tune(ns) -> int:
    state_dir, seed, fmt = _opts(ns)
    if ns.budget < 1:
        raise UsageError("--budget must be at least 1")
    cmd = ns.cmd[1:] if ns.cmd and ns.cmd[0] == "--" else ns.cmd
    if bool(cmd) == bool(ns.synthetic):
        raise UsageError("give exactly one of --synthetic NAME or -- COMMAND")
    store = mgr.ProfileStore(state_dir)
    wl = make_workload(ns.synthetic, ns.noise) if ns.synthetic else None
    space = None
    if not store.exists(ns.workload):
        space = _space_arg(ns.space) or (wl.space if wl else None)
        if space is None:
            raise UsageError("--space is required to create a new workload profile")
    tpl = None
    if cmd:
        tpl = parse_command(cmd, env_mode=ns.env_mode, timeout=ns.timeout)
        tpl.validate(space or store.load(ns.workload).space)

    spawn_failures = 0
    runs = 0
    while runs < ns.budget:
        config, p = store.suggest(ns.workload, space, seed=seed)
        if p.phase == mgr.CONVERGED:
            break
        runs += 1
        if wl is not None:
            cost = eval_synthetic(wl, config, (p.seed, len(p.history)))
            clock = (p.history[-1].timestamp if p.history else 0.0) + cost
            p, _ = store.report(ns.workload, cost, config=config, timestamp=clock)
            continue
        try:
            cost, _meta = run_external(tpl, config, state_dir / "logs", tag=f"{p.workload_id}-{len(p.history) + 1:04d}")
        except SpawnFailure:
            spawn_failures += 1
            store.mark_failed(ns.workload)
            log.error("could not start the workload (%d in a row)", spawn_failures)
            if spawn_failures >= MAX_CONSECUTIVE_SPAWN_FAILURES:
                raise
            continue
        except ExecutionError as exc:
            spawn_failures = 0
            store.mark_failed(ns.workload)
            log.warning("run failed, no cost recorded: %s", exc)
            continue
        spawn_failures = 0
        p, _ = store.report(ns.workload, cost, config=config)

    p = store.load(ns.workload)
    out_dir = Path(ns.out_dir) if ns.out_dir else state_dir / "reports" / p.workload_id
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "history.csv").write_text(evalkit.history_csv(p.history))
    optimum = wl.optimum_cost if wl else None
    (out_dir / "summary.json").write_text(evalkit.summary_json(p.history, optimum))
    out = _summary(p)
    out["runs_this_invocation"] = runs
    out["report_dir"] = str(out_dir)
    _emit(out, fmt)
    return EXIT_OK


def cmd_simulate(ns) -> int:
    _, _, fmt = _opts(ns)
    if ns.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    cfg = experiments.ExperimentConfig(seeds=ns.seeds, noise_fraction=ns.noise, horizon=ns.horizon)
    summary = experiments.simulate(ns.out_dir, cfg, suite=tuple(ns.suite))
    if fmt == "json":
        print(json.dumps(experiments._clean(summary), indent=2, sort_keys=True))
    else:
        print(f"wrote {ns.out_dir}/sa_recovery.csv, convergence.csv, summary.json")
    return EXIT_OK


def cmd_sa_validate(ns) -> int:
    _, _, fmt = _opts(ns)
    cfg = experiments.ExperimentConfig(seeds=ns.seeds, noise_fraction=ns.noise)
    result = {}
    for name in ns.workload:
        truth, runs = experiments.sa_recovery(name, cfg)
        result[name] = {
            "s_error": [r.s_error for r in runs],
            "percentiles": evalkit.percentiles([r.s_error for r in runs]),
            "ground_truth_high": sorted(truth.high_set),
            "ground_truth_top_k": list(truth.top_k),
        }
    if fmt == "csv":
        print("workload,seed,s_error")
        for name, r in result.items():
            for i, e in enumerate(r["s_error"]):
                print(f"{name},{i},{e!r}")
    else:
        print(json.dumps(result, indent=2, sort_keys=True))
    return EXIT_OK


COMMANDS = {
    "suggest": cmd_suggest,
    "report": cmd_report,
    "status": cmd_status,
    "tune": cmd_tune,
    "simulate": cmd_simulate,
    "sa-validate": cmd_sa_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(f"sigtune: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SigtuneError, OSError, json.JSONDecodeError, KeyError, ValueError) as exc:
        print(f"sigtune: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
