import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sigtune.space import ConfigSpace, ParameterSpec, example_space

settings.register_profile(
    "repo", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")


@pytest.fixture(scope="session")
def spark_space():
    return example_space()


@pytest.fixture
def mixed_space():
    return ConfigSpace(
        (
            ParameterSpec("x", "continuous", 0.0, 10.0, default=5.0),
            ParameterSpec("buf", "continuous", 1.0, 1000.0, default=10.0, scale="log"),
            ParameterSpec("cores", "integer", 1, 8, default=4),
            ParameterSpec("mem", "integer", 8, 512, default=64, scale="log"),
            ParameterSpec("codec", "categorical", levels=("lz4", "snappy", "zstd", "lzf"), default="lz4"),
            ParameterSpec("compress", "boolean", default=False),
        )
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
