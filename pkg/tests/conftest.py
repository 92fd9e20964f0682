import numpy as np
import pytest

from sicmem.lattice import CrystalModel, enumerate_sites


@pytest.fixture(scope="session")
def crystal():
    return CrystalModel()


@pytest.fixture(scope="session")
def sites6(crystal):
    return enumerate_sites(crystal, 6.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from _report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        passed, title, detail = RESULTS[number]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {number:>2}. {title}: {detail}")
