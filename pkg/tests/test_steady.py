import numpy as np
import pytest

from jjpump.model import NetworkModel, PumpParams, build_asymmetric_pump, build_symmetric_pump
from jjpump.steady import (
    FixedPointConfig,
    SingularDenominatorError,
    fixed_point_iterate,
    multi_start,
    random_initial_state,
    residual,
    solve_linear_ec0,
    solve_steady,
)
from jjpump.dynamics import relax_to_steady

from conftest import two_mode


def closed_form_dn(K, dg, gamma=1.0):
    return (dg / gamma) / (1 + 4 * K ** 2 / gamma ** 2)


@pytest.mark.parametrize("K,g,alpha", [(0.5, (2.0, 1.0), 0.5), (0.1, (3.0, 0.5), 0.5),
                                       (1.7, (0.2, 4.0), 0.1)])
def test_two_mode_all_methods(K, g, alpha):
    m = two_mode(K=K, gamma_up=g)
    dn = closed_form_dn(K, g[0] - g[1])
    for res in (fixed_point_iterate(m, FixedPointConfig(tol=1e-12, alpha=alpha)),
                solve_linear_ec0(m), relax_to_steady(m, tol=1e-10, rel_tol=1e-11, abs_tol=1e-14)):
        assert res.converged
        n = res.state.n
        assert n[0] - n[1] == pytest.approx(dn, abs=1e-9)
        assert n.sum() == pytest.approx(sum(g), abs=1e-9)


def test_mixing_bound_for_two_modes():
    # population error contracts by |1 - alpha (1 + 4K^2/gamma^2)| per sweep
    m = two_mode(K=1.0)
    assert fixed_point_iterate(m, FixedPointConfig(alpha=0.2)).converged
    res = fixed_point_iterate(m, FixedPointConfig(alpha=0.5, max_iter=2000))
    assert not res.converged
    assert solve_steady(m, "fixed_point", FixedPointConfig(alpha=0.5, max_iter=2000)).converged


def test_two_mode_coherence():
    res = solve_linear_ec0(two_mode())
    assert res.state.z(0, 1) == pytest.approx(-0.25j, abs=1e-14)


def test_fixed_point_against_linear_solve_on_pump():
    m = build_symmetric_pump(PumpParams(K=0.1, bias=2.0, flux=0.3))
    a = fixed_point_iterate(m, FixedPointConfig(tol=1e-11)).state.sigma
    b = solve_linear_ec0(m).state.sigma
    assert np.max(np.abs(a - b)) < 1e-9


def test_linear_solve_refuses_charging():
    with pytest.raises(ValueError, match="capacitance"):
        solve_linear_ec0(two_mode(Ec=0.1))


def test_singular_denominator_raises():
    # gamma enters the coherence denominator; a tiny gamma with degenerate modes vanishes it
    m = NetworkModel(np.zeros(2), np.array([[0, 0.1], [0.1, 0]]), np.zeros((2, 2)), 1.0, 1e-15)
    with pytest.raises(SingularDenominatorError):
        fixed_point_iterate(m)


def test_non_convergence_reported():
    m = build_symmetric_pump(PumpParams(K=0.1, E_C=0.1, bias=1.0, flux=0.25))
    res = fixed_point_iterate(m, FixedPointConfig(max_iter=3))
    assert not res.converged
    assert res.iterations == 3


def test_solve_steady_fallback_tags_method():
    m = build_symmetric_pump(PumpParams(K=0.1, E_C=0.1, bias=1.0, flux=0.25))
    res = solve_steady(m, "fixed_point", FixedPointConfig(max_iter=2, tol=1e-9))
    assert res.converged and res.method == "ode_relax"
    assert res.iterations > 2
    res = solve_steady(m, "fixed_point", FixedPointConfig(max_iter=2), fallback=False)
    assert not res.converged and res.method == "fixed_point"


def test_solve_steady_unknown_method():
    with pytest.raises(ValueError):
        solve_steady(two_mode(), "newton")


def test_random_start_reproducible():
    m = build_asymmetric_pump(PumpParams(K=0.1, bias=1.0))
    a = random_initial_state(m, 7).sigma
    b = random_initial_state(m, 7).sigma
    np.testing.assert_array_equal(a, b)
    assert np.allclose(a, a.conj().T)
    assert not np.array_equal(a, random_initial_state(m, 8).sigma)


def test_multi_start_unique(figure_params):
    m = build_symmetric_pump(figure_params.replace(flux_ratio=0.1))
    rep = multi_start(m, n_starts=5, config=FixedPointConfig(tol=1e-11))
    assert rep.n_nonconverged == 0
    assert rep.max_distance < 1e-8


def test_residual_small_at_solution(figure_params):
    m = build_symmetric_pump(figure_params)
    res = fixed_point_iterate(m)
    assert res.residual == residual(m, res.state) < 1e-8


@pytest.mark.parametrize("kw", [{"tol": 0}, {"alpha": 0}, {"alpha": 1.5}, {"max_iter": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        FixedPointConfig(**kw)
