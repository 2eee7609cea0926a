"""Randomized checks of structural invariants."""
import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from jjpump.dynamics import mdm_derivative
from jjpump.model import NetworkModel, PumpParams, build_pump
from jjpump.observables import current_report, pump_current
from jjpump.steady import FixedPointConfig, fixed_point_iterate, solve_linear_ec0, solve_steady
from jjpump.sweep import _fmt

FAST = settings(max_examples=25, deadline=None)

K = st.floats(0.0, 0.3)
EC = st.floats(0.0, 0.5)
BIAS = st.floats(-3.0, 3.0)
FLUX = st.floats(-1.0, 1.0)
GEOM = st.booleans()


@st.composite
def networks(draw, max_modes=5):
    J = draw(st.integers(1, max_modes))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    t = rng.normal(size=(J, J)) + 1j * rng.normal(size=(J, J))
    t = 0.3 * (t + t.conj().T)
    np.fill_diagonal(t, 0)
    c = np.abs(rng.normal(size=(J, J)))
    c = 0.2 * (c + c.T)
    np.fill_diagonal(c, 0)
    model = NetworkModel(rng.normal(size=J), t, c, rng.uniform(0, 3, J), rng.uniform(0.5, 2))
    x = rng.normal(size=(J, J)) + 1j * rng.normal(size=(J, J))
    return model, x @ x.conj().T


@FAST
@given(networks())
def test_derivative_hermitian(data):
    model, sigma = data
    d = mdm_derivative(model, sigma)
    assert np.array_equal(d, d.conj().T)


@FAST
@given(networks())
def test_total_number_balance(data):
    # tunneling and charging move pairs around but never create them
    model, sigma = data
    d = mdm_derivative(model, sigma)
    expected = model.gamma_up.sum() - model.gamma * np.trace(sigma).real
    assert np.isclose(np.trace(d).real, expected, atol=1e-9 * (1 + abs(expected)))


@FAST
@given(networks(max_modes=4))
def test_gauge_covariance(data):
    # rephasing the modes rotates tunneling and correlations together
    model, sigma = data
    J = model.n_modes
    phases = np.exp(1j * np.linspace(0.3, 2.0, J))
    U = np.diag(phases)
    t2 = U.conj() @ model.tunneling @ U
    m2 = NetworkModel(model.epsilon, t2, model.capacitance, model.gamma_up, model.gamma)
    s2 = U.conj() @ sigma @ U
    lhs = mdm_derivative(m2, s2)
    rhs = U.conj() @ mdm_derivative(model, sigma) @ U
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(rhs).max()))


def _pump(symmetric, K, Ec, bias, flux):
    m = build_pump(PumpParams(K=K, E_C=Ec, bias=bias, flux=flux), symmetric)
    res = solve_steady(m, config=FixedPointConfig(tol=1e-11))
    assert res.converged
    return m, res


@FAST
@given(GEOM, K, EC, BIAS, FLUX)
def test_steady_conservation(symmetric, K, Ec, bias, flux):
    m, res = _pump(symmetric, K, Ec, bias, flux)
    assert abs(current_report(m, res.state).conservation_defect) < 1e-8
    assert res.state.min_eigenvalue() > 0


@FAST
@given(GEOM, K, EC, BIAS, FLUX)
def test_flux_reversal_flips_pump(symmetric, K, Ec, bias, flux):
    m, res = _pump(symmetric, K, Ec, bias, flux)
    a = pump_current(m, res.state)
    m, res = _pump(symmetric, K, Ec, bias, -flux)
    assert abs(a + pump_current(m, res.state)) < 1e-9


@FAST
@given(GEOM, K, EC, BIAS, FLUX)
def test_flux_period(symmetric, K, Ec, bias, flux):
    m1, r1 = _pump(symmetric, K, Ec, bias, flux)
    m2, r2 = _pump(symmetric, K, Ec, bias, flux + 1.0)
    assert abs(pump_current(m1, r1.state) - pump_current(m2, r2.state)) < 1e-9


@FAST
@given(K, EC, BIAS, FLUX)
def test_asymmetric_bias_reversal_keeps_pump(K, Ec, bias, flux):
    m1, r1 = _pump(False, K, Ec, bias, flux)
    m2, r2 = _pump(False, K, Ec, -bias, flux)
    assert abs(pump_current(m1, r1.state) - pump_current(m2, r2.state)) < 1e-9


@FAST
@given(K, BIAS, FLUX)
def test_asymmetric_no_pumping_without_charging(K, bias, flux):
    m, res = _pump(False, K, 0.0, bias, flux)
    assert abs(pump_current(m, res.state)) < 1e-8


@FAST
@given(GEOM, K, BIAS, FLUX)
def test_fixed_point_matches_linear_solve(symmetric, K, bias, flux):
    m = build_pump(PumpParams(K=K, bias=bias, flux=flux), symmetric)
    a = fixed_point_iterate(m, FixedPointConfig(tol=1e-11))
    b = solve_linear_ec0(m)
    assert a.converged
    assert np.max(np.abs(a.state.sigma - b.state.sigma)) < 1e-9


@settings(max_examples=200)
@given(st.floats(allow_nan=False, allow_infinity=False))
def test_csv_float_round_trip(x):
    assert float(_fmt(x)) == x
