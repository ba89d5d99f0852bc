import numpy as np
import pytest

from shbdf3.grid import GridField, GridSpec

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number: int, title: str, passed: bool, detail: str):
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        lines.append((number, line))
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines):
        terminalreporter.write_line(line)


def random_field(spec: GridSpec, rng, scale: float = 1.0) -> GridField:
    return GridField(spec, scale * rng.standard_normal(spec.shape))
