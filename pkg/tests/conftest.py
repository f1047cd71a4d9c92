import dataclasses
import os

import pytest
from hypothesis import HealthCheck, settings

from cocoa_abm.domain import ScenarioConfig

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def small_config(**overrides) -> ScenarioConfig:
    """30 houses, 12 days, fast transitions and frequent infection."""
    base = dict(n_houses=30, n_initial_infected=5, max_days=12, beta=0.01,
                incubation_set=(1, 2), infectious_set=(2, 3), gamma0=0.3, gamma1=0.1)
    base.update(overrides)
    return dataclasses.replace(ScenarioConfig(), **base)


@pytest.fixture
def tiny_config():
    return small_config()


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append((number, line))
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
