from __future__ import annotations

import numpy as np
import pytest

from avgctl.systems import rotating_field, rotating_field_2
from avgctl.two_body import two_body_system

# criterion number -> (passed, one-line detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def rot():
    return rotating_field()


@pytest.fixture(scope="session")
def rot2():
    return rotating_field_2()


@pytest.fixture(scope="session")
def tb():
    return two_body_system()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k:>2}: {detail}")
