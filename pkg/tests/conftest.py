import numpy as np
import pytest

from pdstsp.instance import Instance, random_instance

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_instances():
    """A spread of small random instances, n in 4..8."""
    out = []
    for seed in range(12):
        n = 4 + seed % 5
        out.append(random_instance(n, 1 + seed % 3, (0, 50, 100)[seed % 3], seed))
    return out


@pytest.fixture
def hand_instance():
    # depot (0,0), A=(3,0) truck-only, B=(0,4) eligible, sp=1
    coords = np.array([[0, 0], [3, 0], [0, 4], [0, 0]], dtype=float)
    diff = coords[:, None, :] - coords[None, :, :]
    t = np.sqrt((diff ** 2).sum(-1))
    return Instance.from_arrays(t, {2: 8.0}, eligible=[2], m=1, coords=coords)
