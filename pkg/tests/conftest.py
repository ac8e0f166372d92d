import numpy as np
import pytest

from objmem.geometry import BoundingBox
from objmem.memory import ObjectMemory, Patch, StorageCosts

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def box(x=0.0, y=0.0, w=10.0, h=10.0) -> BoundingBox:
    return BoundingBox(x, y, w, h)


def patch(seed=0, d=1.0, dim=4) -> Patch:
    return Patch(np.random.default_rng(seed).standard_normal(dim) + 0.1, d)


@pytest.fixture
def costs():
    return StorageCosts(frame_bytes=1000, patch_bytes=100, record_bytes=10)


@pytest.fixture
def mem(costs):
    return ObjectMemory(costs)
