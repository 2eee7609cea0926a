"""Mean-field equations of motion for the two-point correlation matrix.

The state is ``sigma[j, k] = <a_j^dag a_k>``.  Under the mean-field closure the
charging terms act as population-dependent onsite shifts, and the whole
right-hand side can be written compactly as

    d sigma/dt = i [h_eff, sigma] - gamma * sigma + diag(gamma_up)

with ``h_eff = tunneling + diag(epsilon + 2 v)`` and
``v_j = sum_m c_jm (n_j - n_m)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.integrate import RK45

from .model import NetworkModel

__all__ = [
    "MDMState",
    "TrajectorySample",
    "IntegrationError",
    "HermiticityError",
    "coulomb_shift",
    "mdm_derivative",
    "evolve",
    "relax_to_steady",
    "default_initial_state",
    "write_trajectory_csv",
    "trajectory_columns",
]

HERMITIAN_TOL = 1e-10


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state during time integration."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (t = {time:.6g})")
        self.time = time


class HermiticityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MDMState:
    """Macroscopic density matrix: populations on the diagonal, coherences off it."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigma, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError(f"sigma must be square, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @classmethod
    def from_populations(cls, n) -> "MDMState":
        return cls(np.diag(np.asarray(n, dtype=float)).astype(complex))

    @property
    def n(self) -> np.ndarray:
        return self.sigma.diagonal().real.copy()

    @property
    def n_modes(self) -> int:
        return self.sigma.shape[0]

    def z(self, j: int, k: int) -> complex:
        return complex(self.sigma[j, k])

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(self.sigma - self.sigma.conj().T), initial=0.0))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma).min())

    def symmetrized(self) -> "MDMState":
        return MDMState(0.5 * (self.sigma + self.sigma.conj().T))


@dataclass(frozen=True)
class TrajectorySample:
    time: float
    state: MDMState
    step_size_used: float


def coulomb_shift(model: NetworkModel, n: np.ndarray) -> np.ndarray:
    """Charging potential ``v_j = sum_m c_jm (n_j - n_m)``."""
    c = model.capacitance
    return c.sum(axis=1) * n - c @ n


def _check_hermitian(sigma: np.ndarray) -> None:
    scale = max(1.0, float(np.max(np.abs(sigma), initial=0.0)))
    defect = float(np.max(np.abs(sigma - sigma.conj().T), initial=0.0))
    if defect > HERMITIAN_TOL * scale:
        raise HermiticityError(f"state is not hermitian (defect {defect:.3g})")


def _rhs(model: NetworkModel, sigma: np.ndarray) -> np.ndarray:
    n = sigma.diagonal().real
    onsite = model.epsilon + 2.0 * coulomb_shift(model, n)
    # half of i[h, sigma] - gamma sigma; adding the adjoint gives an exactly
    # hermitian result for hermitian sigma
    x = 1j * (model.tunneling @ sigma + onsite[:, None] * sigma) - 0.5 * model.gamma * sigma
    out = x + x.conj().T
    out[np.diag_indices_from(out)] += model.gamma_up
    return out


def mdm_derivative(model: NetworkModel, state: MDMState | np.ndarray) -> np.ndarray:
    """Time derivative of the correlation matrix under the mean-field closure.

    Populations obey ``dn_j/dt = -gamma n_j + gamma_up_j + 2 sum_m Im(t_mj z_jm)``;
    coherences pick up a rotation at the charging-shifted detuning and feed
    from population imbalance through ``t_jk``.
    """
    sigma = state.sigma if isinstance(state, MDMState) else np.asarray(state, dtype=complex)
    if sigma.shape != (model.n_modes, model.n_modes):
        raise ValueError(f"state shape {sigma.shape} does not match a {model.n_modes}-mode model")
    _check_hermitian(sigma)
    return _rhs(model, sigma)


def default_initial_state(model: NetworkModel) -> MDMState:
    """Fixed point of the uncoupled network: ``n_j = gamma_up_j / gamma``, no coherence."""
    return MDMState.from_populations(model.gamma_up / model.gamma)


def _as_sigma(model: NetworkModel, initial) -> np.ndarray:
    if initial is None:
        return default_initial_state(model).sigma.copy()
    sigma = initial.sigma if isinstance(initial, MDMState) else np.asarray(initial, dtype=complex)
    _check_hermitian(sigma)
    return 0.5 * (sigma + sigma.conj().T)


def _stepper(model, sigma0, t_bound, rel_tol, abs_tol, first_step, max_step=np.inf):
    shape = sigma0.shape

    def f(_t, y):
        return _rhs(model, y.reshape(shape)).ravel()

    return RK45(f, 0.0, sigma0.ravel().astype(complex), t_bound,
                rtol=rel_tol, atol=abs_tol, first_step=first_step, max_step=max_step)


def evolve(
    model: NetworkModel,
    initial: MDMState | np.ndarray | None,
    t_end: float,
    rel_tol: float = 1e-9,
    *,
    abs_tol: float = 1e-12,
    first_step: float | None = None,
    t_eval=None,
) -> list[TrajectorySample]:
    """Integrate the mean-field equations with Dormand-Prince RK4(5).

    Returns one sample per accepted step (plus ``t = 0``), or, when ``t_eval``
    is given, samples interpolated from the dense output at those times.
    The state is re-symmetrized after every step.
    """
    if not t_end >= 0:
        raise ValueError("t_end must be >= 0")
    if not 0 < rel_tol <= 1e-2:
        raise ValueError("rel_tol must lie in (0, 1e-2]")
    sigma = _as_sigma(model, initial)
    shape = sigma.shape
    samples = [TrajectorySample(0.0, MDMState(sigma), 0.0)]
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if np.any(np.diff(t_eval) <= 0) or (t_eval.size and (t_eval[0] < 0 or t_eval[-1] > t_end)):
            raise ValueError("t_eval must be increasing and inside [0, t_end]")
        samples = [] if t_eval.size and t_eval[0] > 0 else samples
        pending = t_eval[t_eval > 0]
    if t_end == 0:
        return samples

    first = first_step if first_step is not None else min(1e-3 / model.gamma, t_end)
    solver = _stepper(model, sigma, t_end, rel_tol, abs_tol, first)
    while solver.status == "running":
        t_prev = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise IntegrationError(f"integration failed: {msg}", solver.t)
        y = solver.y.reshape(shape)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", solver.t)
        y = 0.5 * (y + y.conj().T)
        solver.y = y.ravel()
        h = solver.t - t_prev
        if t_eval is None:
            samples.append(TrajectorySample(float(solver.t), MDMState(y), float(h)))
        else:
            hit = pending[pending <= solver.t]
            if hit.size:
                dense = solver.dense_output()
                for t in hit:
                    s = dense(t).reshape(shape)
                    samples.append(TrajectorySample(float(t), MDMState(0.5 * (s + s.conj().T)), float(h)))
                pending = pending[hit.size:]
    return samples


def relax_to_steady(
    model: NetworkModel,
    initial: MDMState | np.ndarray | None = None,
    tol: float = 1e-10,
    t_max: float = 1e4,
    *,
    rel_tol: float | None = None,
    abs_tol: float | None = None,
):
    """Integrate forward until the max-norm of the derivative drops below ``tol``.

    Near the fixed point the residual settles at a floor set by the
    integrator tolerance (roughly ``rel_tol * |sigma| * gamma``), so by
    default ``rel_tol`` follows ``tol``.  Steps are capped at ``1/gamma``:
    longer steps sit at the edge of the explicit method's stability region
    and leave the residual jittering above small targets.

    Hitting ``t_max`` first is not an error: the result simply carries
    ``converged=False``.
    """
    from .steady import SteadyStateResult

    if not tol > 0:
        raise ValueError("tol must be > 0")
    rel_tol = min(1e-9, max(tol, 1e-13)) if rel_tol is None else rel_tol
    abs_tol = 1e-3 * rel_tol if abs_tol is None else abs_tol
    sigma = _as_sigma(model, initial)
    shape = sigma.shape
    res = float(np.max(np.abs(_rhs(model, sigma))))
    steps = 0
    if res < tol:
        return SteadyStateResult(MDMState(sigma), res, 0, True, "ode_relax", model_time=0.0)
    solver = _stepper(model, sigma, t_max, rel_tol, abs_tol, 1e-3 / model.gamma,
                      max_step=1.0 / model.gamma)
    while solver.status == "running":
        msg = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationError(f"integration failed: {msg}", solver.t)
        y = solver.y.reshape(shape)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("non-finite state", solver.t)
        y = 0.5 * (y + y.conj().T)
        solver.y = y.ravel()
        res = float(np.max(np.abs(_rhs(model, y))))
        if res < tol:
            return SteadyStateResult(MDMState(y), res, steps, True, "ode_relax",
                                     model_time=float(solver.t))
    return SteadyStateResult(MDMState(solver.y.reshape(shape)), res, steps, False,
                             "ode_relax", model_time=float(solver.t))


def trajectory_columns(n_modes: int, labels=None) -> list[str]:
    names = list(labels) if labels else [str(j + 1) for j in range(n_modes)]
    cols = ["time"] + [f"n_{a}" for a in names]
    for j in range(n_modes):
        for k in range(j + 1, n_modes):
            cols += [f"re_z_{names[j]}{names[k]}", f"im_z_{names[j]}{names[k]}"]
    return cols


def write_trajectory_csv(samples, path, labels=None, header_lines=()) -> None:
    """Trajectory as CSV: time, populations, then Re/Im of the upper-triangle coherences."""
    path = Path(path)
    if not samples:
        raise ValueError("empty trajectory")
    J = samples[0].state.n_modes
    iu = np.triu_indices(J, 1)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            for line in header_lines:
                fh.write(f"# {line}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(trajectory_columns(J, labels))
            for s in samples:
                z = s.state.sigma[iu]
                row = [s.time, *s.state.n]
                for v in z:
                    row += [v.real, v.imag]
                w.writerow([repr(float(x)) if math.isfinite(x) else str(x) for x in row])
    except OSError as exc:
        raise OSError(f"cannot write trajectory to {path}: {exc}") from exc
