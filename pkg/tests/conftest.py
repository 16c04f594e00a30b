import numpy as np
import pytest

from rwfootball.game import GameConfig
from rwfootball.oracle import build_wp_table


@pytest.fixture(scope="session")
def game():
    return GameConfig(L=4, T=56)


@pytest.fixture(scope="session")
def table(game):
    return build_wp_table(game)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


CRITERIA_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[CRITERIA_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line: ``criterion(n, ok, detail)``."""
    lines = request.config.stash[CRITERIA_KEY]

    def record(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
