import os

import numpy as np
import pytest

from pvlab.grid import GridSpec

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    print(ACCEPTANCE[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


@pytest.fixture(autouse=True)
def _single_thread(monkeypatch):
    monkeypatch.delenv("PVL_THREADS", raising=False)
    yield


@pytest.fixture
def grid256():
    return GridSpec(2, 256, 1.0)


@pytest.fixture
def grid128():
    return GridSpec(2, 128, 1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    os.environ.setdefault("MPLBACKEND", "Agg")
