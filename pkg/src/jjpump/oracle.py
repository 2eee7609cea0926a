"""Exact Lindblad dynamics on a truncated Fock space.

Used to check the mean-field equations: for quadratic Hamiltonians (no
charging) the two-point matrix obeys closed linear equations, so the exact
and mean-field trajectories coincide up to Fock truncation.

Every term of the Hamiltonian conserves the total pair number and the
dissipator only moves weight between neighbouring number sectors, so a
density matrix that starts block diagonal in total number stays that way.
``evolve_exact`` integrates just those blocks, which keeps cutoffs in the
twenties cheap for two modes.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .dynamics import evolve
from .model import NetworkModel

__all__ = [
    "MAX_DIMENSION",
    "DimensionError",
    "TruncationWarning",
    "FockOperatorSet",
    "FockDensityMatrix",
    "DeviationReport",
    "build_fock_operators",
    "hamiltonian",
    "lindblad_derivative",
    "vacuum",
    "two_point_matrix",
    "evolve_exact",
    "compare_meanfield",
]

MAX_DIMENSION = 4096
LEAK_THRESHOLD = 1e-6


class DimensionError(ValueError):
    pass


class TruncationWarning(RuntimeWarning):
    pass


@dataclass(frozen=True, eq=False)
class FockOperatorSet:
    n_modes: int
    cutoff: int
    annihilators: tuple[sp.csr_matrix, ...]
    occupations: np.ndarray  # (dim, J) occupation numbers of each basis state

    @property
    def dim(self) -> int:
        return (self.cutoff + 1) ** self.n_modes

    @property
    def creators(self) -> tuple[sp.csr_matrix, ...]:
        return tuple(a.conj().T.tocsr() for a in self.annihilators)

    def number(self, j: int) -> sp.csr_matrix:
        return sp.diags(self.occupations[:, j].astype(float), format="csr")


@dataclass(frozen=True, eq=False)
class FockDensityMatrix:
    rho: np.ndarray

    def trace(self) -> complex:
        return complex(np.trace(self.rho))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T)).min())


def build_fock_operators(n_modes: int, cutoff: int) -> FockOperatorSet:
    """Ladder operators ``a_j`` on ``(cutoff+1)**n_modes`` states (mode 0 most significant)."""
    if n_modes < 1 or cutoff < 1:
        raise ValueError("need n_modes >= 1 and cutoff >= 1")
    dim = (cutoff + 1) ** n_modes
    if dim > MAX_DIMENSION:
        raise DimensionError(
            f"Fock dimension {dim} = ({cutoff}+1)^{n_modes} exceeds {MAX_DIMENSION}"
        )
    ladder = sp.diags(np.sqrt(np.arange(1, cutoff + 1, dtype=float)), 1, format="csr")
    eye = sp.identity(cutoff + 1, format="csr")
    ops = []
    for j in range(n_modes):
        factors = [ladder if k == j else eye for k in range(n_modes)]
        op = factors[0]
        for f in factors[1:]:
            op = sp.kron(op, f, format="csr")
        ops.append(op.astype(complex).tocsr())
    occ = np.array(list(itertools.product(range(cutoff + 1), repeat=n_modes)), dtype=int)
    return FockOperatorSet(n_modes, cutoff, tuple(ops), occ)


def hamiltonian(model: NetworkModel, ops: FockOperatorSet) -> sp.csr_matrix:
    """Onsite + tunneling + charging terms, with ``(n_j - n_k)^2`` taken exactly."""
    _check_dims(model, ops)
    J = model.n_modes
    occ = ops.occupations.astype(float)
    diag = occ @ model.epsilon
    for j in range(J):
        for k in range(j + 1, J):
            if model.capacitance[j, k]:
                diag = diag + model.capacitance[j, k] * (occ[:, j] - occ[:, k]) ** 2
    H = sp.diags(diag.astype(complex), format="csr")
    a, ad = ops.annihilators, ops.creators
    for j in range(J):
        for k in range(J):
            # tunneling[j, k] multiplies a_k^dag a_j
            if j != k and model.tunneling[j, k] != 0:
                H = H + model.tunneling[j, k] * (ad[k] @ a[j])
    return H.tocsr()


def _check_dims(model: NetworkModel, ops: FockOperatorSet) -> None:
    if model.n_modes != ops.n_modes:
        raise DimensionError(f"model has {model.n_modes} modes, operators {ops.n_modes}")


def _jumps(model: NetworkModel, ops: FockOperatorSet):
    out = []
    for j, (a, ad) in enumerate(zip(ops.annihilators, ops.creators)):
        out.append((float(model.gamma_down[j]), a))
        out.append((float(model.gamma_up[j]), ad))
    return out


def _sparse_generator(model: NetworkModel, ops: FockOperatorSet):
    H = hamiltonian(model, ops)
    jumps = [(g, L, L.conj().T.tocsr()) for g, L in _jumps(model, ops) if g]
    heff = H.astype(complex)
    for g, L, Ld in jumps:
        heff = heff - 0.5j * g * (Ld @ L)
    heff = heff.tocsr()

    def apply(rho: np.ndarray) -> np.ndarray:
        # -i(H_eff rho - rho H_eff^dag) + sum_j g L rho L^dag; rho H^dag = (H rho^dag)^dag
        out = -1j * (heff @ rho) + 1j * (heff @ rho.conj().T).conj().T
        for g, L, _ in jumps:
            out += g * (L @ (L @ rho.conj().T).conj().T)
        return out

    return apply


def lindblad_derivative(model: NetworkModel, rho, ops: FockOperatorSet) -> np.ndarray:
    """``d rho/dt = -i[H, rho] + D(rho)`` with the local dissipator.

    ``D`` has an annihilation channel at rate ``gamma_down_j = gamma + gamma_up_j``
    and a creation channel at rate ``gamma_up_j`` for every mode.
    """
    _check_dims(model, ops)
    r = rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho, dtype=complex)
    if r.shape != (ops.dim, ops.dim):
        raise DimensionError(f"rho has shape {r.shape}, operators act on dimension {ops.dim}")
    return _sparse_generator(model, ops)(r)


def vacuum(ops: FockOperatorSet) -> FockDensityMatrix:
    rho = np.zeros((ops.dim, ops.dim), dtype=complex)
    rho[0, 0] = 1.0
    return FockDensityMatrix(rho)


def two_point_matrix(rho, ops: FockOperatorSet) -> np.ndarray:
    """``sigma[j, k] = Tr(a_j^dag a_k rho)``."""
    r = rho.rho if isinstance(rho, FockDensityMatrix) else np.asarray(rho)
    a, ad = ops.annihilators, ops.creators
    J = ops.n_modes
    sigma = np.empty((J, J), dtype=complex)
    for j in range(J):
        for k in range(J):
            sigma[j, k] = (ad[j] @ a[k]).multiply(r.T).sum()
    return sigma


class _SectorSystem:
    """Block representation of rho in total-number sectors."""

    def __init__(self, model: NetworkModel, ops: FockOperatorSet):
        total = ops.occupations.sum(axis=1)
        self.ops = ops
        self.sectors = [np.flatnonzero(total == N) for N in range(total.max() + 1)]
        H = hamiltonian(model, ops).tocsr()
        J = ops.n_modes
        a = ops.annihilators
        sizes = [s.size for s in self.sectors]
        self.offsets = np.concatenate([[0], np.cumsum([d * d for d in sizes])])

        def block(M, rows, cols):
            return M[rows][:, cols].toarray()

        nS = len(self.sectors)
        # a_j restricted to sector N -> N-1
        self.lower = [[block(a[j], self.sectors[N - 1], self.sectors[N]) if N else None
                       for N in range(nS)] for j in range(J)]
        self.heff = []
        for N, idx in enumerate(self.sectors):
            h = block(H, idx, idx).astype(complex)
            for j in range(J):
                gd, gu = model.gamma_down[j], model.gamma_up[j]
                if N:
                    A = self.lower[j][N]
                    h = h - 0.5j * gd * (A.conj().T @ A)
                if N + 1 < nS:
                    B = self.lower[j][N + 1]
                    h = h - 0.5j * gu * (B @ B.conj().T)
            self.heff.append(h)
        self.gd = model.gamma_down
        self.gu = model.gamma_up
        self.pair_blocks = [[[block(ops.creators[j] @ a[k], idx, idx) for idx in self.sectors]
                             for k in range(J)] for j in range(J)]
        self.top = [[ops.occupations[idx, j] == ops.cutoff for idx in self.sectors]
                    for j in range(J)]

    def split(self, y):
        out = []
        for N, idx in enumerate(self.sectors):
            d = idx.size
            out.append(y[self.offsets[N]:self.offsets[N + 1]].reshape(d, d))
        return out

    def pack(self, rho: np.ndarray) -> np.ndarray:
        return np.concatenate([rho[np.ix_(idx, idx)].ravel() for idx in self.sectors])

    def is_block_diagonal(self, rho: np.ndarray, atol: float = 1e-14) -> bool:
        mask = np.ones(rho.shape, dtype=bool)
        for idx in self.sectors:
            mask[np.ix_(idx, idx)] = False
        return not np.any(np.abs(rho[mask]) > atol)

    def rhs(self, _t, y):
        blocks = self.split(y)
        out = np.empty_like(y)
        J = self.ops.n_modes
        nS = len(blocks)
        for N, r in enumerate(blocks):
            h = self.heff[N]
            d = -1j * (h @ r) + 1j * (r @ h.conj().T)
            for j in range(J):
                if N + 1 < nS and self.gd[j]:
                    A = self.lower[j][N + 1]
                    d += self.gd[j] * (A @ blocks[N + 1] @ A.conj().T)
                if N and self.gu[j]:
                    A = self.lower[j][N]
                    d += self.gu[j] * (A.conj().T @ blocks[N - 1] @ A)
            out[self.offsets[N]:self.offsets[N + 1]] = d.ravel()
        return out

    def sigma(self, y) -> np.ndarray:
        blocks = self.split(y)
        J = self.ops.n_modes
        s = np.empty((J, J), dtype=complex)
        for j in range(J):
            for k in range(J):
                s[j, k] = sum(np.sum(p * r.T) for p, r in zip(self.pair_blocks[j][k], blocks))
        return s

    def trace(self, y) -> complex:
        return sum(np.trace(r) for r in self.split(y))

    def top_population(self, y) -> float:
        blocks = self.split(y)
        J = self.ops.n_modes
        return max(
            float(sum(np.diagonal(r).real[m].sum() for r, m in zip(blocks, self.top[j])))
            for j in range(J)
        )

    def min_eigenvalue(self, y) -> float:
        return min(float(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min())
                   for r in self.split(y) if r.size)

    def dense(self, y) -> np.ndarray:
        rho = np.zeros((self.ops.dim, self.ops.dim), dtype=complex)
        for idx, r in zip(self.sectors, self.split(y)):
            rho[np.ix_(idx, idx)] = r
        return rho


@dataclass
class ExactTrajectory:
    times: np.ndarray
    sigma: np.ndarray  # (T, J, J)
    trace: np.ndarray
    top_population: np.ndarray
    min_eigenvalue: np.ndarray
    final_rho: np.ndarray = field(repr=False)

    @property
    def truncation_leak(self) -> float:
        return float(self.top_population.max())


def evolve_exact(model: NetworkModel, rho0=None, t_end: float = 10.0, cutoff: int = 12,
                 rel_tol: float = 1e-10, *, abs_tol: float = 1e-13, t_eval=None,
                 ops: FockOperatorSet | None = None) -> ExactTrajectory:
    """Integrate the full master equation and record ``Tr(a_j^dag a_k rho)``.

    A :class:`TruncationWarning` is issued when the population of any mode's
    top Fock level exceeds ``LEAK_THRESHOLD`` at a sample time.
    """
    ops = ops or build_fock_operators(model.n_modes, cutoff)
    _check_dims(model, ops)
    rho0 = vacuum(ops) if rho0 is None else rho0
    r0 = rho0.rho if isinstance(rho0, FockDensityMatrix) else np.asarray(rho0, dtype=complex)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, 101)
    t_eval = np.asarray(t_eval, dtype=float)

    sectors = _SectorSystem(model, ops)
    if sectors.is_block_diagonal(r0):
        y0 = sectors.pack(r0)
        fun = sectors.rhs
        view = sectors
    else:
        fun_dense = _sparse_generator(model, ops)
        dim = ops.dim
        y0 = r0.ravel()

        def fun(_t, y):
            return fun_dense(y.reshape(dim, dim)).ravel()

        view = _DenseView(ops)
    if t_end > 0:
        sol = solve_ivp(fun, (0.0, t_end), y0.astype(complex), method="RK45",
                        t_eval=t_eval, rtol=rel_tol, atol=abs_tol)
        if sol.status < 0:
            raise RuntimeError(f"exact integration failed: {sol.message}")
        ys = sol.y.T
        times = sol.t
    else:
        ys = y0[None, :].astype(complex)
        times = np.zeros(1)
    traj = ExactTrajectory(
        times=times,
        sigma=np.array([view.sigma(y) for y in ys]),
        trace=np.array([view.trace(y) for y in ys]),
        top_population=np.array([view.top_population(y) for y in ys]),
        min_eigenvalue=np.array([view.min_eigenvalue(y) for y in ys]),
        final_rho=view.dense(ys[-1]),
    )
    if traj.truncation_leak > LEAK_THRESHOLD:
        warnings.warn(
            f"top Fock level carries population {traj.truncation_leak:.2e} "
            f"(cutoff {ops.cutoff}); results are truncation-limited",
            TruncationWarning, stacklevel=2,
        )
    return traj


class _DenseView:
    def __init__(self, ops: FockOperatorSet):
        self.ops = ops

    def _rho(self, y):
        return y.reshape(self.ops.dim, self.ops.dim)

    def sigma(self, y):
        return two_point_matrix(self._rho(y), self.ops)

    def trace(self, y):
        return np.trace(self._rho(y))

    def top_population(self, y):
        d = np.diagonal(self._rho(y)).real
        occ = self.ops.occupations
        return max(float(d[occ[:, j] == self.ops.cutoff].sum()) for j in range(self.ops.n_modes))

    def min_eigenvalue(self, y):
        r = self._rho(y)
        return float(np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min())

    def dense(self, y):
        return self._rho(y).copy()


@dataclass
class DeviationReport:
    max_dev: float
    final_dev: float
    truncation_leak: float
    max_covariance: float
    params: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _max_covariance(rho: np.ndarray, ops: FockOperatorSet, sigma: np.ndarray) -> float:
    """Largest ``|<a_j^dag a_k a_m^dag a_n> - sigma_jk sigma_mn|``."""
    J = ops.n_modes
    a, ad = ops.annihilators, ops.creators
    pairs = {(j, k): (ad[j] @ a[k]) for j in range(J) for k in range(J)}
    worst = 0.0
    for (m, n), Q in pairs.items():
        q_rho = Q @ rho
        for (j, k), P in pairs.items():
            # Tr(P Q rho) as an elementwise product with the transpose
            four = P.multiply(q_rho.T).sum()
            worst = max(worst, abs(four - sigma[j, k] * sigma[m, n]))
    return float(worst)


def compare_meanfield(model: NetworkModel, t_end: float = 10.0, cutoff: int = 12,
                      rel_tol: float = 1e-10, n_samples: int = 101) -> DeviationReport:
    """Run exact and mean-field dynamics from the vacuum and compare ``sigma(t)``."""
    times = np.linspace(0.0, t_end, n_samples)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        exact = evolve_exact(model, None, t_end, cutoff, rel_tol, t_eval=times)
    mf = evolve(model, np.zeros((model.n_modes, model.n_modes)), t_end,
                rel_tol=min(rel_tol, 1e-9), abs_tol=1e-13, t_eval=times)
    sig_mf = np.array([s.state.sigma for s in mf])
    dev = np.max(np.abs(exact.sigma - sig_mf), axis=(1, 2))
    ops = build_fock_operators(model.n_modes, cutoff)
    cov = _max_covariance(exact.final_rho, ops, exact.sigma[-1])
    params = {
        "n_modes": model.n_modes,
        "cutoff": cutoff,
        "t_end": t_end,
        "rel_tol": rel_tol,
        "gamma": model.gamma,
        "gamma_up": model.gamma_up.tolist(),
        "max_charging": float(model.capacitance.max(initial=0.0)),
        "max_tunneling": float(np.abs(model.tunneling).max(initial=0.0)),
    }
    return DeviationReport(float(dev.max()), float(dev[-1]), exact.truncation_leak, cov, params)
