import numpy as np
import pytest

from jjpump.dynamics import MDMState
from jjpump.model import PumpParams, build_asymmetric_pump, build_symmetric_pump
from jjpump.observables import current_report, pump_current, terminal_current, terminal_currents
from jjpump.steady import solve_steady

from conftest import two_mode


def test_currents_at_uncoupled_fixed_point_vanish():
    m = build_symmetric_pump(PumpParams(K=0.0, bias=1.0))
    state = MDMState.from_populations(m.gamma_up / m.gamma)
    np.testing.assert_array_equal(terminal_currents(m, state), 0.0)


def test_two_mode_currents():
    state = MDMState(np.array([[1.75, -0.25j], [0.25j, 1.25]]))
    m = two_mode()
    assert terminal_current(m, state, 0) == pytest.approx(0.25)
    assert terminal_current(m, state, 1) == pytest.approx(-0.25)
    with pytest.raises(IndexError):
        terminal_current(m, state, 2)


def test_pump_needs_labels():
    with pytest.raises(KeyError):
        pump_current(two_mode(), np.eye(2))
    assert current_report(two_mode(), np.eye(2)).pump is None


@pytest.mark.parametrize("build", [build_symmetric_pump, build_asymmetric_pump])
def test_conservation_and_pump_definition(build, figure_params):
    m = build(figure_params.replace(flux_ratio=0.25))
    s = solve_steady(m).state
    rep = current_report(m, s)
    assert abs(rep.conservation_defect) < 1e-8
    I = dict(zip(m.mode_labels, rep.per_terminal))
    assert rep.pump == pytest.approx(I["D"] - I["U"], abs=1e-12)
    d = rep.as_dict()
    assert set(d["per_terminal"]) == {"L", "D", "R", "U"}


def test_bias_drives_current_from_left():
    m = build_symmetric_pump(PumpParams(K=0.1, bias=2.0))
    I = current_report(m, solve_steady(m).state).per_terminal
    assert I[m.index("L")] > 0 > I[m.index("R")]
