import mpmath
import pytest

from shockrefl.thermo import GasParams

mpmath.mp.dps = 40


@pytest.fixture
def gas14():
    return GasParams(gamma=1.4, rho0=1.0, p0=1.0)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        ok, detail = RESULTS[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}: {detail}")
