import os

import numpy as np
import pytest
from hypothesis import settings

from nitsche_hybrid.geometry import DEFAULT_DELTA, build_partition, default_shape
from nitsche_hybrid.mesh import build_mesh_pair

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("repo")

CACHE_DIR = os.environ.get(
    "NITSCHE_CACHE_DIR", os.path.join(os.path.dirname(__file__), "..", ".cache")
)


@pytest.fixture(scope="session")
def well_partition():
    return build_partition(default_shape("well"), DEFAULT_DELTA["well"])


@pytest.fixture(scope="session")
def well_pair(well_partition):
    """Small non-matching pair: H = 4h."""
    return build_mesh_pair(well_partition, 2.0**-6, 2.0**-4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed after the test summary
ACCEPTANCE_LINES = {}


def record_acceptance(number, ok, detail):
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
