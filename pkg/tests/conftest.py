import numpy as np
import pytest

from jjpump.model import NetworkModel, PumpParams


def two_mode(K=0.5, gamma_up=(2.0, 1.0), gamma=1.0, Ec=0.0):
    t = np.array([[0, K], [K, 0]], dtype=complex)
    c = np.array([[0, Ec], [Ec, 0]], dtype=float)
    return NetworkModel(np.zeros(2), t, c, gamma_up, gamma)


@pytest.fixture
def two_mode_model():
    return two_mode()


@pytest.fixture
def figure_params():
    # parameter point of the pumping heatmaps: K = 0.1, E_C = 0.1, gamma_up = 100, Gamma = 1
    return PumpParams(K=0.1, E_C=0.1, gamma_up_base=100.0, bias=1.0)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[str, str] = {}


def record_criterion(key: str, passed: bool, detail: str) -> None:
    line = f"{key}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[key] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[-1])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
