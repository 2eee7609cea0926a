import numpy as np
import pytest

from jjpump.dynamics import (
    HermiticityError,
    MDMState,
    default_initial_state,
    evolve,
    mdm_derivative,
    relax_to_steady,
    trajectory_columns,
    write_trajectory_csv,
)
from jjpump.model import NetworkModel, PumpParams, build_symmetric_pump

from conftest import two_mode


def single_mode(g_up=0.7, gamma=1.3):
    return NetworkModel(np.zeros(1), np.zeros((1, 1)), np.zeros((1, 1)), [g_up], gamma)


def test_single_mode_closed_form():
    m = single_mode()
    times = np.linspace(0, 5, 11)
    traj = evolve(m, MDMState.from_populations([3.0]), 5.0, t_eval=times)
    n = np.array([s.state.n[0] for s in traj])
    expected = 0.7 / 1.3 + (3.0 - 0.7 / 1.3) * np.exp(-1.3 * times)
    np.testing.assert_allclose(n, expected, rtol=1e-8, atol=1e-10)


def test_uncoupled_keeps_coherences_zero():
    m = build_symmetric_pump(PumpParams(K=0.0, E_C=0.1, bias=2.0))
    traj = evolve(m, MDMState.from_populations([1, 2, 3, 4]), 3.0)
    for s in traj:
        off = s.state.sigma - np.diag(np.diag(s.state.sigma))
        assert np.all(off == 0)


def test_zero_time_returns_initial():
    m = two_mode()
    init = default_initial_state(m)
    traj = evolve(m, init, 0.0)
    assert len(traj) == 1
    assert traj[0].time == 0.0
    np.testing.assert_array_equal(traj[0].state.sigma, init.sigma)


def test_derivative_vanishes_at_known_steady_state():
    m = two_mode()
    sigma = np.array([[1.75, -0.25j], [0.25j, 1.25]])
    assert np.max(np.abs(mdm_derivative(m, sigma))) < 1e-14


def test_derivative_rejects_nonhermitian():
    with pytest.raises(HermiticityError):
        mdm_derivative(two_mode(), np.array([[1, 0.5], [0.1, 1]], dtype=complex))


def test_derivative_shape_check():
    with pytest.raises(ValueError, match="shape"):
        mdm_derivative(two_mode(), np.eye(3))


def test_trajectory_stays_hermitian():
    m = build_symmetric_pump(PumpParams(K=0.1, E_C=0.1, bias=1.0, flux=0.25))
    for s in evolve(m, None, 2.0):
        assert s.state.hermiticity_defect() == 0.0


def test_relax_matches_closed_form():
    res = relax_to_steady(two_mode(), tol=1e-10)
    assert res.converged and res.method == "ode_relax"
    np.testing.assert_allclose(res.state.n, [1.75, 1.25], atol=1e-9)


def test_relax_not_converged_is_not_error():
    res = relax_to_steady(two_mode(), tol=1e-12, t_max=0.1)
    assert not res.converged
    assert res.model_time == pytest.approx(0.1)


def test_bad_arguments():
    m = two_mode()
    with pytest.raises(ValueError):
        evolve(m, None, -1.0)
    with pytest.raises(ValueError):
        evolve(m, None, 1.0, rel_tol=0.5)


def test_trajectory_csv(tmp_path):
    m = two_mode()
    traj = evolve(m, None, 1.0, t_eval=[0.0, 0.5, 1.0])
    p = tmp_path / "t.csv"
    write_trajectory_csv(traj, p, labels=("A", "B"), header_lines=["note: x"])
    lines = p.read_text().splitlines()
    assert lines[0] == "# note: x"
    assert lines[1].split(",") == trajectory_columns(2, ("A", "B"))
    assert lines[1] == "time,n_A,n_B,re_z_AB,im_z_AB"
    assert len(lines) == 5
    row = [float(x) for x in lines[-1].split(",")]
    assert row[1] == traj[-1].state.n[0]
