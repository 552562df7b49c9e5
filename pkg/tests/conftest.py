import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def small_net():
    from nkesn import NetworkConfig, build_network
    return build_network(NetworkConfig(n_outputs=6, k=2, seed=11))


ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion; printed at session end."""

    def report(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
