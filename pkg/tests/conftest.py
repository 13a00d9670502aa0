import numpy as np
import pytest

from fwmpair.calibration import load_preset
from fwmpair.dispersion import SS_FF
from fwmpair.jsa import PumpSpec, build_jsa
from fwmpair.schmidt import heralded_density_matrix


@pytest.fixture(scope="session")
def preset():
    return load_preset("paper")


@pytest.fixture(scope="session")
def pump():
    return PumpSpec()


@pytest.fixture(scope="session")
def preset_jsa(preset, pump):
    return build_jsa(preset, pump, SS_FF)


@pytest.fixture(scope="session")
def preset_rho(preset_jsa):
    return heralded_density_matrix(preset_jsa)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
