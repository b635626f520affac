import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from swapqoc.controls import MERGED, SEPARATED
from swapqoc.grape import spectral_basis
from swapqoc.lattice import DEFAULT_LATTICE

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid64():
    return DEFAULT_LATTICE.grid(64)


@pytest.fixture(scope="session")
def separated64():
    return spectral_basis(SEPARATED, 64, "separated")


@pytest.fixture(scope="session")
def merged64():
    return spectral_basis(MERGED, 64, "merged")


@pytest.fixture(scope="session")
def merged32():
    return spectral_basis(MERGED, 32, "merged")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def record(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
