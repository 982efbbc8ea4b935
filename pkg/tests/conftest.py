import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from salnav.navigation import floyd_warshall
from salnav.world import WorldSpec, build_map, generate_world

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def world12():
    return generate_world(WorldSpec(seed=0, rooms=12))


@pytest.fixture(scope="session")
def map12(world12):
    return build_map(world12)


@pytest.fixture(scope="session")
def tables12(map12):
    return floyd_warshall(map12)


@pytest.fixture(scope="session")
def world42():
    return generate_world(WorldSpec(seed=0, rooms=42))


@pytest.fixture(scope="session")
def map42(world42):
    return build_map(world42)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
