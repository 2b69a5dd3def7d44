import pytest

from rndirac.geometry import BlackHole

import helpers


@pytest.fixture(scope="session")
def bh():
    return BlackHole(1.0, 0.6)


@pytest.fixture(scope="session")
def evolve_setup():
    return helpers.evolve_setup()


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
