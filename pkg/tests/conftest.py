import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=300, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cantor10():
    from cartan_lab.protocols import cantor_fixture
    return cantor_fixture(10)


@pytest.fixture(scope="session")
def cantor_unit10():
    from cartan_lab.geometry import cantor_maps, generate_ifs_set
    return generate_ifs_set(cantor_maps(0.0, 1.0), 10)


@pytest.fixture(scope="session")
def diamond6():
    from cartan_lab.protocols import diamond_fixture
    return diamond_fixture(6)


CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def verdict():
    """Record ``verdict(n, passed, detail)`` for the acceptance summary."""
    def record(n: int, passed: bool, detail: str = "") -> bool:
        CRITERIA[n] = (bool(passed), detail)
        print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
