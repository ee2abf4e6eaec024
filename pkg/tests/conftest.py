import numpy as np
import pytest

from nhreduce.examples import NAMES, build_example
from nhreduce.gauge import build_gauge
from nhreduce.mwreduce import build_leaf


@pytest.fixture(scope="session")
def examples():
    return {name: build_example(name) for name in NAMES}


@pytest.fixture(scope="session")
def gauges(examples):
    return {n: build_gauge(ex.system, ex.sections, ex.reduced) for n, ex in examples.items()}


@pytest.fixture(scope="session")
def leaves(gauges):
    return {n: build_leaf(g) for n, g in gauges.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=NAMES)
def name(request):
    return request.param


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def report():
    def add(line):
        print(line)
        ACCEPTANCE_LINES.append(line)
    return add


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
