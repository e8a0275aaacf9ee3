import numpy as np
import pytest

from sigtune.errors import NonFiniteCost, SAComplete, SAIncomplete, ValueOutOfDomain
from sigtune.sensitivity import SAState, keep_count, sa_next_config, sa_report, sa_result
from sigtune.space import ConfigSpace, ParameterSpec
from sigtune.synthetic import eval_synthetic, make_workload


def drive(state, fn, reports):
    for _ in range(reports):
        c = sa_next_config(state)
        state = sa_report(state, c, fn(c))
    return state


def test_keep_count():
    assert [keep_count(0.6, d) for d in (30, 18, 10, 1)] == [18, 11, 6, 1]


def test_round_shrinkage(spark_space):
    wl = make_workload("balanced")
    fn = lambda c: eval_synthetic(wl, c)  # noqa: E731
    s = SAState(spark_space)
    c = sa_next_config(s)
    assert len(c) == 30 and s.current_space.fixed == {}
    assert sa_next_config(s) == c  # no hidden counter
    s = drive(s, fn, 9)
    assert s.d_free == 30 and s.samples_this_round == 9
    s = drive(s, fn, 1)
    assert s.d_free == 18 and s.round_remaining == 1 and s.samples_this_round == 0
    c = sa_next_config(s)
    assert all(c[n] == v for n, v in s.current_space.fixed.items()) and len(s.current_space.fixed) == 12
    s = drive(s, fn, 10)
    assert s.complete and s.d_free == 11
    sig, reduced = sa_result(s)
    assert len(sig) == 11 and set(sig) == set(reduced.free_names)
    last = s.round_importances[-1]
    assert [last[n] for n in sig] == sorted((last[n] for n in sig), reverse=True)
    with pytest.raises(SAComplete):
        sa_next_config(s)
    with pytest.raises(SAComplete):
        sa_report(s, c, 1.0)


def test_fixed_params_never_return(spark_space):
    wl = make_workload("memory")
    s = SAState(spark_space)
    fixed_before = {}
    for _ in range(20):
        c = sa_next_config(s)
        s = sa_report(s, c, eval_synthetic(wl, c))
        assert fixed_before.items() <= s.current_space.fixed.items()
        fixed_before = dict(s.current_space.fixed)


def test_one_round_from_ten():
    space = ConfigSpace(tuple(ParameterSpec(f"p{i}", "continuous", 0.0, 1.0, default=0.5) for i in range(10)))
    s = SAState(space, round_remaining=1)
    s = drive(s, lambda c: 1 + 5 * c["p3"] + c["p7"], 10)
    sig, reduced = sa_result(s)
    assert len(sig) == 6 and reduced.d_free == 6
    assert "p3" in sig


def test_result_mid_round_and_bad_reports(spark_space):
    s = SAState(spark_space)
    with pytest.raises(SAIncomplete):
        sa_result(s)
    c = sa_next_config(s)
    with pytest.raises(NonFiniteCost):
        sa_report(s, c, float("nan"))
    s2 = drive(s, lambda c: 10.0 + c["spark.executor.cores"], 10)
    off = dict(sa_next_config(s2))
    name, value = next(iter(s2.current_space.fixed.items()))
    p = s2.current_space.param(name)
    off[name] = p.decode(0.0) if value != p.decode(0.0) else p.decode(0.99)
    with pytest.raises(ValueOutOfDomain):
        sa_report(s2, off, 5.0)


def test_top_k_cap(spark_space):
    wl = make_workload("balanced")
    s = drive(SAState(spark_space, top_k_cap=6), lambda c: eval_synthetic(wl, c), 20)
    sig, reduced = sa_result(s)
    assert len(sig) == 6 and reduced.d_free == 6


def test_total_budget_is_rounds_times_n(spark_space):
    s = SAState(spark_space, round_remaining=3, n_per_round=5)
    n = 0
    while not s.complete:
        s = sa_report(s, sa_next_config(s), 1.0 + n % 3)
        n += 1
    assert n == 15


def test_high_influence_dims_always_survive(spark_space):
    wl = make_workload("memory", 0.02)
    for seed in range(10):
        s = drive(SAState(spark_space, seed=seed), lambda c: eval_synthetic(wl, c, seed), 20)
        sig, _ = sa_result(s)
        assert set(wl.designated) <= set(sig)


def test_oob_quality_gate(spark_space):
    for name in ("memory", "balanced", "flat"):
        wl = make_workload(name, 0.02)
        for seed in range(3):
            s = drive(SAState(spark_space, seed=seed), lambda c: eval_synthetic(wl, c, seed), 20)
            assert max(s.round_oob_errors) < 0.40


@pytest.mark.xfail(strict=True, reason="10 samples per round cannot separate 6 of 30 dims; see the decisions ledger")
def test_all_six_designated_dims_survive(spark_space):
    wl = make_workload("balanced", 0.02)
    hits = 0
    for seed in range(10):
        s = drive(SAState(spark_space, seed=seed), lambda c: eval_synthetic(wl, c, (seed, 0)), 20)
        hits += set(wl.designated) <= set(sa_result(s)[0])
    assert hits >= 9
