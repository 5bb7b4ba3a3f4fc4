import numpy as np
import pytest

from pairex.grid import RadialProfile, make_grid, make_potential

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record_acceptance(label: str, passed: bool, detail: str = "") -> None:
    _ACCEPTANCE[label] = (bool(passed), detail)


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE, key=lambda s: int(s[2:])):
        ok, detail = _ACCEPTANCE[label]
        terminalreporter.write_line(f"{label}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def grid16():
    return make_grid(1, 16, 2 * np.pi)


@pytest.fixture
def pot16(grid16):
    return make_potential(RadialProfile("gaussian", 0.75, 1.0), 10.0, 0.0, grid16)
