import functools

import numpy as np
import pytest

from directive_dse.evaluator import brute_force, fixture_specs
from directive_dse.pareto import weighted_resource


@functools.lru_cache(maxsize=None)
def oracle(fixture_id):
    """All (point, record) pairs of a fixture, computed once per session."""
    specs = fixture_specs(fixture_id)
    return specs, brute_force(fixture_id, specs)


def ok_objectives(fixture_id):
    _, results = oracle(fixture_id)
    return [((r.latency, weighted_resource(r.ratios)), r.point_id) for _, r in results if r.ok]


@pytest.fixture
def s1_specs():
    return fixture_specs("S1")


@pytest.fixture
def s2_specs():
    return fixture_specs("S2")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)
