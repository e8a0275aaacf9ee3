import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from sigtune.cli import main
from sigtune.synthetic import eval_synthetic, make_workload


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture
def state(tmp_path, monkeypatch):
    d = tmp_path / "state"
    monkeypatch.setenv("SIGTUNE_STATE_DIR", str(d))
    return d


def test_suggest_creates_profile(capsys, state):
    code, out, _ = run(capsys, "suggest", "--workload", "job", "--space", "example")
    assert code == 0 and len(json.loads(out)) == 30
    assert (state / "job.json").exists()


def test_usage_and_runtime_exit_codes(capsys, state, tmp_path):
    assert run(capsys, "suggest", "--workload", "x", "--bogus")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    code, _, err = run(capsys, "suggest", "--workload", "x", "--space", tmp_path / "missing.json")
    assert code == 2 and "missing.json" in err
    (state / "bad.json").parent.mkdir(parents=True, exist_ok=True)
    (state / "bad.json").write_text("{not json")
    assert run(capsys, "suggest", "--workload", "bad")[0] == 2
    assert run(capsys, "report", "--workload", "x")[0] == 1


def test_report_loop_reaches_tuning(capsys, state):
    wl = make_workload("memory")
    run(capsys, "suggest", "--workload", "m", "--space", "example")
    for i in range(20):
        if i:
            run(capsys, "suggest", "--workload", "m")
        prof = json.loads((state / "m.json").read_text())
        cost = eval_synthetic(wl, prof["pending"])
        code, out, _ = run(capsys, "report", "--workload", "m", "--cost", cost, "--throughput", 120)
        assert code == 0
    summary = json.loads(out)
    assert summary["phase"] == "Tuning" and summary["observations"] == 20
    assert summary["throughput_entries"] == 20 and summary["free_dimensions"] == 11


def test_bad_costs_exit_2(capsys, state):
    run(capsys, "suggest", "--workload", "n", "--space", "example")
    assert run(capsys, "report", "--workload", "n", "--cost", -4)[0] == 2
    assert run(capsys, "report", "--workload", "n", "--cost", "nan")[0] == 2
    assert run(capsys, "report", "--workload", "n", "--cost", 3)[0] == 0


def test_tune_external_is_resumable(capsys, state):
    code, out, _ = run(capsys, "tune", "--workload", "ext", "--space", "example", "--budget", 5, "--", "true")
    s = json.loads(out)
    assert code == 0 and s["observations"] == 5 and s["phase"] == "SA"
    code, out, _ = run(capsys, "tune", "--workload", "ext", "--budget", 3, "--", "true")
    assert json.loads(out)["observations"] == 8
    rows = list(csv.reader(open(state / "reports" / "ext" / "history.csv")))
    assert rows[0] == ["index", "cost_seconds", "cumulative_seconds", "phase"] and len(rows) == 9


def test_tune_placeholder_rendering(capsys, state, tmp_path):
    out_file = tmp_path / "seen.txt"
    code, _, _ = run(
        capsys, "tune", "--workload", "ph", "--space", "example", "--budget", 1, "--",
        sys.executable, "-c", f"open({str(out_file)!r}, 'w').write('{{{{spark.executor.cores}}}}')",
    )
    assert code == 0 and out_file.read_text().isdigit()


def test_repeated_spawn_failures(capsys, state):
    code, _, err = run(capsys, "tune", "--workload", "sp", "--space", "example", "--budget", 10, "--", "/no/such/bin")
    assert code == 2
    prof = json.loads((state / "sp.json").read_text())
    assert prof["history"] == [] and [e[1] for e in prof["events"]] == ["failed"] * 3


def test_synthetic_tune_deterministic_and_idempotent_when_converged(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        code, out, _ = run(capsys, "--state-dir", d, "tune", "--workload", "syn", "--synthetic", "balanced", "--seed", 7)
        assert code == 0
    assert (a / "syn.json").read_bytes() == (b / "syn.json").read_bytes()
    s = json.loads(out)
    assert s["phase"] == "Converged" and s["observations_by_phase"]["SA"] == 20
    before = (a / "syn.json").read_bytes()
    c1 = json.loads(run(capsys, "suggest", "--workload", "syn", "--state-dir", a)[1])
    c2 = json.loads(run(capsys, "suggest", "--workload", "syn", "--state-dir", a)[1])
    assert c1 == c2 == s["best_config"] and (a / "syn.json").read_bytes() == before
    run(capsys, "status", "--workload", "syn", "--state-dir", a, "--format", "csv")
    assert (a / "syn.json").read_bytes() == before


def test_simulate_outputs(capsys, tmp_path):
    args = ("simulate", "--seeds", 2, "--suite", "memory", "--format", "csv")
    assert run(capsys, *args, "--out-dir", tmp_path / "r1")[0] == 0
    assert run(capsys, *args, "--out-dir", tmp_path / "r2")[0] == 0
    for name in ("sa_recovery.csv", "convergence.csv", "summary.json", "histories/balanced_seed1.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()
    rows = list(csv.DictReader(open(tmp_path / "r1" / "convergence.csv")))
    assert len(rows) == 2
    summary = json.loads((tmp_path / "r1" / "summary.json").read_text())
    best = [float(r["best_cost"]) for r in rows]
    assert summary["convergence"]["best_cost"]["p50"] == pytest.approx(float(np.percentile(best, 50)))
    sa = list(csv.DictReader(open(tmp_path / "r1" / "sa_recovery.csv")))
    assert len(sa) == 2 and {r["evaluations"] for r in sa} == {"20"}


def test_sa_validate(capsys):
    code, out, _ = run(capsys, "sa-validate", "--workload", "memory", "--seeds", 2, "--format", "csv")
    assert code == 0 and out.splitlines()[0] == "workload,seed,s_error" and len(out.splitlines()) == 3


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "sigtune.cli", "--state-dir", str(tmp_path), "suggest", "--workload", "w", "--space", "example"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and "spark.executor.cores" in proc.stdout
