import math

import numpy as np
import pytest

from misr_refkit import _kernels
from misr_refkit.synthetic import smooth_field

ACCEPTANCE_LINES: list[str] = []


def textured(rng, size=128, corr=4.0):
    """Smooth random texture scaled into [0.1, 0.7]."""
    f = smooth_field(rng, (size, size), corr) + 0.5 * smooth_field(rng, (size, size), corr / 2)
    f = (f - f.min()) / (f.max() - f.min())
    return 0.1 + 0.6 * f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=sorted(_kernels.backends()))
def kernels(request):
    return _kernels.backends()[request.param]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def record(criterion: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
