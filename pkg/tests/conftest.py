from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    _ACCEPTANCE.append((name, "PASSED" if report.passed else "FAILED"))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _ACCEPTANCE:
        terminalreporter.write_line(f"ACCEPTANCE {name}: {outcome}")


@pytest.fixture
def rng_seed() -> int:
    return 20240817
