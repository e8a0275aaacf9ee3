import sys

import pytest

from sigtune.errors import ExecutionTimeout, NonZeroExit, SpawnFailure, UnknownParam
from sigtune.executor import CommandTemplate, env_name, parse_command, render_value, run_external
from sigtune.space import ConfigSpace, ParameterSpec


def test_render_values():
    assert render_value(4) == "4"
    assert render_value(True) == "true" and render_value(False) == "false"
    assert render_value(0.1234567) == "0.123457"
    assert render_value(2.0) == "2"
    assert render_value("lz4") == "lz4"


def test_echo_substitution(tmp_path):
    tpl = CommandTemplate(("echo", "{{cores}}"))
    cost, meta = run_external(tpl, {"cores": 4}, tmp_path / "logs", tag="t")
    assert cost > 0 and meta.argv == ("echo", "4")
    assert (tmp_path / "logs" / "t.log").read_text() == "4\n"


def test_sleep_duration():
    cost, _ = run_external(CommandTemplate(("sleep", "0.2")), {})
    assert 0.2 <= cost < 1.5


def test_failures_report_no_cost():
    with pytest.raises(ExecutionTimeout):
        run_external(CommandTemplate(("sleep", "10"), timeout=1), {})
    with pytest.raises(NonZeroExit) as e:
        run_external(CommandTemplate((sys.executable, "-c", "raise SystemExit(3)")), {})
    assert e.value.returncode == 3
    with pytest.raises(SpawnFailure):
        run_external(CommandTemplate(("/definitely/not/here",)), {})


def test_env_mode(tmp_path):
    tpl = CommandTemplate(
        (sys.executable, "-c", "import os; print(os.environ['SIGTUNE_SPARK_EXECUTOR_CORES'])"), env_mode=True
    )
    run_external(tpl, {"spark.executor.cores": 3}, tmp_path, tag="env")
    assert (tmp_path / "env.log").read_text().strip() == "3"
    assert env_name("spark.executor.cores") == "SIGTUNE_SPARK_EXECUTOR_CORES"


def test_template_validation():
    space = ConfigSpace((ParameterSpec("cores", "integer", 1, 8, default=2),))
    CommandTemplate(("run", "--cores={{cores}}")).validate(space)
    with pytest.raises(UnknownParam):
        CommandTemplate(("run", "{{memory}}")).validate(space)
    with pytest.raises(ValueError):
        CommandTemplate(("x",), timeout=0)
    assert parse_command(["sleep 0.1"]).argv == ("sleep", "0.1")
