"""Direct solvers for the nonequilibrium steady state."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .dynamics import MDMState, _rhs, coulomb_shift, relax_to_steady
from .model import NetworkModel

__all__ = [
    "SteadyStateResult",
    "FixedPointConfig",
    "UniquenessReport",
    "SingularDenominatorError",
    "SingularSystemError",
    "fixed_point_iterate",
    "residual",
    "solve_linear_ec0",
    "multi_start",
    "random_initial_state",
    "solve_steady",
    "METHODS",
]

METHODS = ("fixed_point", "ode_relax", "linear_ec0")

_SINGULAR = 1e-14


class SingularDenominatorError(ArithmeticError):
    def __init__(self, j: int, k: int, value: complex):
        super().__init__(f"coherence denominator for ({j},{k}) vanishes: |{value}| < {_SINGULAR}")
        self.pair = (j, k)


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass
class SteadyStateResult:
    state: MDMState
    residual: float
    iterations: int
    converged: bool
    method: str
    seed: int | None = None
    model_time: float | None = None


@dataclass(frozen=True)
class FixedPointConfig:
    """Settings for :func:`fixed_point_iterate`.

    ``seed=None`` starts from the uncoupled fixed point; an integer seed draws
    a random start (see :func:`random_initial_state`).
    """

    tol: float = 1e-8
    max_iter: int = 100_000
    alpha: float = 0.5
    seed: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


def residual(model: NetworkModel, state: MDMState | np.ndarray) -> float:
    """Max-norm defect of the steady-state conditions (the largest |d sigma/dt|)."""
    sigma = state.sigma if isinstance(state, MDMState) else np.asarray(state, dtype=complex)
    return float(np.max(np.abs(_rhs(model, sigma))))


def random_initial_state(model: NetworkModel, seed: int) -> MDMState:
    """Populations uniform in ``[0, 2 gamma_up_j/gamma]``; coherences uniform in a
    complex disc of radius ``0.1 * mean(gamma_up)/gamma``."""
    rng = np.random.default_rng(seed)
    J = model.n_modes
    ratio = model.gamma_up / model.gamma
    n = rng.uniform(0.0, 2.0 * ratio)
    radius = 0.1 * float(ratio.mean())
    iu = np.triu_indices(J, 1)
    m = iu[0].size
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, m))
    phase = rng.uniform(0.0, 2 * np.pi, m)
    sigma = np.diag(n).astype(complex)
    sigma[iu] = r * np.exp(1j * phase)
    sigma[iu[1], iu[0]] = np.conj(sigma[iu])
    return MDMState(sigma)


def fixed_point_iterate(model: NetworkModel, config: FixedPointConfig = FixedPointConfig(),
                        initial: MDMState | None = None) -> SteadyStateResult:
    """Self-consistent iteration of the steady-state conditions.

    Each sweep recomputes every coherence from the current populations and
    coherences, then forms candidate populations from the fresh coherences
    and mixes them in with weight ``alpha``.  Convergence requires the
    population update ``sum_j |n_new - n_old|``, the largest coherence update
    and the full residual to all fall below ``tol``.
    """
    J = model.n_modes
    gamma = model.gamma
    if initial is not None:
        sigma = np.array(initial.sigma, dtype=complex)
    elif config.seed is not None:
        sigma = random_initial_state(model, config.seed).sigma.copy()
    else:
        sigma = np.diag(model.gamma_up / gamma).astype(complex)
    n = sigma.diagonal().real.copy()
    off = ~np.eye(J, dtype=bool)
    base = model.gamma_up / gamma
    alpha = config.alpha
    with np.errstate(over="ignore", invalid="ignore"):
        return _iterate(model, config, sigma, n, off, base, alpha)


def _iterate(model, config, sigma, n, off, base, alpha):
    gamma = model.gamma
    t = model.tunneling
    res = np.inf
    for it in range(1, config.max_iter + 1):
        onsite = model.epsilon + 2.0 * coulomb_shift(model, n)
        denom = 1j * gamma + onsite[:, None] - onsite[None, :]
        bad = np.abs(denom) < _SINGULAR
        bad &= off
        if bad.any():
            j, k = map(int, np.argwhere(bad)[0])
            raise SingularDenominatorError(j, k, denom[j, k])
        # numerator t_jk dn_jk + sum_{m != j,k} (t_mk z_jm - t_jm z_mk) = (sigma t - t sigma)_jk
        np.fill_diagonal(sigma, n)
        numer = sigma @ t - t @ sigma
        z_new = np.where(off, numer / np.where(off, denom, 1.0), 0.0)
        dz = float(np.max(np.abs(z_new - np.where(off, sigma, 0.0)), initial=0.0))
        # n*_j = gamma_up_j/gamma + (2/gamma) sum_m Im(t_mj z_jm) = ... Im((z t)_jj)
        n_star = base + (2.0 / gamma) * np.einsum("jm,mj->j", z_new, t).imag
        n_new = (1.0 - alpha) * n + alpha * n_star
        dn = float(np.sum(np.abs(n_new - n)))
        sigma = z_new
        np.fill_diagonal(sigma, n_new)
        n = n_new
        if not np.all(np.isfinite(sigma)):
            break
        if dn < config.tol and dz < config.tol:
            res = residual(model, sigma)
            if res < config.tol:
                return SteadyStateResult(MDMState(sigma), res, it, True, "fixed_point",
                                         seed=config.seed)
    if np.all(np.isfinite(sigma)):
        res = residual(model, sigma)
    return SteadyStateResult(MDMState(sigma), float(res), it, False, "fixed_point",
                             seed=config.seed)


def _packing(J: int):
    """Real coordinates x = (n, Re z_upper, Im z_upper) -> complex sigma entries."""
    iu = np.triu_indices(J, 1)
    m = iu[0].size
    P = np.zeros((J * J, J + 2 * m), dtype=complex)
    idx = np.arange(J * J).reshape(J, J)
    for j in range(J):
        P[idx[j, j], j] = 1.0
    for p, (j, k) in enumerate(zip(*iu)):
        P[idx[j, k], J + p] = 1.0
        P[idx[j, k], J + m + p] = 1j
        P[idx[k, j], J + p] = 1.0
        P[idx[k, j], J + m + p] = -1j
    return P, iu, idx


def solve_linear_ec0(model: NetworkModel) -> SteadyStateResult:
    """Exact steady state when charging vanishes (the conditions are then affine).

    Assembles ``i [h, sigma] - gamma sigma + diag(gamma_up) = 0`` as a real
    linear system in the populations and the real and imaginary parts of the
    upper-triangle coherences (``J + J(J-1)`` unknowns).
    """
    if np.any(model.capacitance != 0):
        raise ValueError("solve_linear_ec0 requires an all-zero capacitance matrix")
    J = model.n_modes
    h = model.tunneling + np.diag(model.epsilon)
    eye = np.eye(J)
    # row-major vec: vec(A X B) = (A kron B^T) vec(X)
    L = 1j * (np.kron(h, eye) - np.kron(eye, h.T)) - model.gamma * np.eye(J * J)
    P, iu, idx = _packing(J)
    A = L @ P
    b = -np.diag(model.gamma_up).astype(complex).ravel()
    rows = [idx[j, j] for j in range(J)] + [idx[j, k] for j, k in zip(*iu)]
    diag_rows, upper_rows = rows[:J], rows[J:]
    # diagonal equations are real; upper-triangle equations contribute Re and Im
    A_real = np.vstack([A[diag_rows].real, A[upper_rows].real, A[upper_rows].imag])
    b_real = np.concatenate([b[diag_rows].real, b[upper_rows].real, b[upper_rows].imag])
    try:
        x = np.linalg.solve(A_real, b_real)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError(f"steady-state system is singular: {exc}") from exc
    sigma = (P @ x).reshape(J, J)
    return SteadyStateResult(MDMState(sigma), residual(model, sigma), 1, True, "linear_ec0")


@dataclass
class UniquenessReport:
    max_distance: float
    n_nonconverged: int
    results: list[SteadyStateResult] = field(repr=False, default_factory=list)

    @property
    def n_starts(self) -> int:
        return len(self.results)


def multi_start(model: NetworkModel, n_starts: int = 20, base_seed: int = 0,
                config: FixedPointConfig = FixedPointConfig()) -> UniquenessReport:
    """Run the fixed-point solver from ``n_starts`` random starts.

    Run ``i`` uses seed ``base_seed + i``.  The distance between two
    converged states is the largest elementwise difference of their
    correlation matrices.
    """
    if n_starts < 2:
        raise ValueError("n_starts must be >= 2")
    from dataclasses import replace

    results = [fixed_point_iterate(model, replace(config, seed=base_seed + i))
               for i in range(n_starts)]
    good = [r.state.sigma for r in results if r.converged]
    dist = 0.0
    for a, b in itertools.combinations(good, 2):
        dist = max(dist, float(np.max(np.abs(a - b))))
    return UniquenessReport(dist, sum(not r.converged for r in results), results)


def solve_steady(model: NetworkModel, method: str = "fixed_point",
                 config: FixedPointConfig = FixedPointConfig(),
                 fallback: bool = True, relax_t_max: float = 1e4) -> SteadyStateResult:
    """Dispatch to one of the steady-state methods.

    With ``fallback``, a fixed-point run that does not converge is retried
    by ODE relaxation; the result then carries ``method="ode_relax"``.
    """
    if method == "linear_ec0":
        return solve_linear_ec0(model)
    if method == "ode_relax":
        return relax_to_steady(model, tol=config.tol, t_max=relax_t_max)
    if method != "fixed_point":
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    result = fixed_point_iterate(model, config)
    if result.converged or not fallback:
        return result
    relaxed = relax_to_steady(model, tol=config.tol, t_max=relax_t_max)
    relaxed.iterations += result.iterations
    return relaxed
