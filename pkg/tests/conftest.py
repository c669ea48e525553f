import numpy as np
import pytest

from lensflow import CutoffProfile, Grid, LensParams


@pytest.fixture(scope="session")
def params():
    return LensParams(np.pi / 3)


@pytest.fixture(scope="session")
def cutoff(params):
    return CutoffProfile.default(params)


@pytest.fixture(scope="session")
def grid(params):
    return Grid.for_params(params, 201)


@pytest.fixture(scope="session")
def coarse(params):
    return Grid.for_params(params, 101)



def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance PASS/FAIL lines at the end of the run."""
    lines = []
    for group in ("passed", "failed"):
        for rep in terminalreporter.stats.get(group, []):
            if rep.when == "call":
                lines += [(rep.nodeid, v) for k, v in rep.user_properties if k == "acceptance"]
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
