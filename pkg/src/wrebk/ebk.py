"""Exponential block Krylov (EBK) solver for linear IVPs with low-rank forcing.

Solves ``y'(t) = -A y(t) + U p(t)``, ``y(0) = v`` on ``[0, T]`` by block
Arnoldi on the shift-and-invert operator ``M = (I + gamma A)^{-1}``.  With
``M V = V H + W h`` the projected operator is ``(H^{-1} - I)/gamma`` and the
residual of ``V u(t)`` is

    r(t) = (1/gamma) (I + gamma A) W h H^{-1} u(t),

so its norm is read off a small matrix once ``(I + gamma A) W`` is QR
factored.  When a cycle reaches its step cap the residual is used as the
source of a correction problem; the correction's projected system is
coupled to the previous cycle's, which keeps the forcing piecewise linear
and the total waveform exact up to the final cycle's residual.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .kernels import block_orthonormalize, expm_dense
from .source import LowRankSource, SampleGrid
from .sparse import Factorization, Work, factorize_shifted, spmv

__all__ = [
    "EbkParams",
    "EbkInfo",
    "EbkConvergenceError",
    "BlockKrylovState",
    "WaveformSolution",
    "constant_waveform",
    "ebk_solve",
    "sai_block_step",
    "propagate_projected",
    "linear_residual_norm",
    "eval_waveform",
    "monitor_indices",
]


class EbkConvergenceError(RuntimeError):
    """Inner solver ran out of restart cycles; carries the partial result."""

    def __init__(self, msg: str, solution: "WaveformSolution", info: "EbkInfo"):
        super().__init__(msg)
        self.solution = solution
        self.info = info


@dataclass
class EbkParams:
    gamma: float | None = None  # default T/10
    max_steps_per_cycle: int = 10
    max_cycles: int = 30
    n_monitor: int = 8
    deflation_tol: float = 1e-10


@dataclass
class EbkInfo:
    steps: int = 0
    cycles: int = 0
    converged: bool = False
    residual_history: list[list[float]] = field(default_factory=list)
    work: Work = field(default_factory=Work)

    @property
    def final_residual(self) -> float:
        for cyc in reversed(self.residual_history):
            if cyc:
                return cyc[-1]
        return float("nan")


# --------------------------------------------------------------------------
# Block Arnoldi on the SAI operator


@dataclass
class BlockKrylovState:
    """Block Arnoldi data for ``M = (I + gamma A)^{-1}``.

    ``V`` holds all computed blocks, including the newest one that has not
    been multiplied by ``M`` yet.  ``Hfull[:n, :n]`` is the square projection
    over the first ``n = sum(block_sizes[:-1])`` columns and
    ``Hfull[n:, :n]`` couples them to the newest block.
    """

    A: object
    factor: Factorization
    gamma: float
    V: np.ndarray
    Hfull: np.ndarray
    block_sizes: list[int]
    deflation_tol: float = 1e-10
    deflations: int = 0

    @property
    def steps(self) -> int:
        return len(self.block_sizes) - 1

    @property
    def n(self) -> int:
        return int(sum(self.block_sizes[:-1]))

    @property
    def exhausted(self) -> bool:
        return self.block_sizes[-1] == 0

    def square(self) -> np.ndarray:
        n = self.n
        return self.Hfull[:n, :n]

    def coupling(self) -> np.ndarray:
        n = self.n
        return self.Hfull[n:n + self.block_sizes[-1], :n]

    def newest(self) -> np.ndarray:
        n = self.n
        return self.V[:, n:n + self.block_sizes[-1]]

    def projected_operator(self) -> np.ndarray:
        """``(H^{-1} - I) / gamma``, the projection of ``A``."""
        H = self.square()
        return (np.linalg.inv(H) - np.eye(H.shape[0])) / self.gamma


def _start_state(A, factor, gamma, Q0, deflation_tol) -> BlockKrylovState:
    b = Q0.shape[1]
    return BlockKrylovState(A=A, factor=factor, gamma=gamma, V=Q0.copy(), Hfull=np.zeros((b, 0)),
                            block_sizes=[b], deflation_tol=deflation_tol)


def sai_block_step(state: BlockKrylovState) -> BlockKrylovState:
    """Apply ``M`` to the newest block, orthogonalize against all previous
    blocks and append the result (in place; the state is returned)."""
    if state.exhausted:
        return state
    n_old = state.n
    b = state.block_sizes[-1]
    W = state.newest()
    X = state.factor.solve(W)
    res = block_orthonormalize(X, against=state.V, deflation_tol=state.deflation_tol)
    state.deflations += len(res.deflated)
    total = state.V.shape[1]
    b_new = res.Q.shape[1]
    H = np.zeros((total + b_new, n_old + b))
    H[:state.Hfull.shape[0], :n_old] = state.Hfull
    H[:total, n_old:n_old + b] = res.coeffs
    H[total:, n_old:n_old + b] = res.R
    state.Hfull = H
    state.V = np.hstack([state.V, res.Q])
    state.block_sizes.append(b_new)
    return state


# --------------------------------------------------------------------------
# Projected propagation


def _segment_exponentials(H: np.ndarray, B: np.ndarray, grid: SampleGrid) -> list[np.ndarray]:
    """``exp(tau Z)`` per grid segment for ``Z = [[-H, B, 0], [0, 0, I], [0, 0, 0]]``.

    The augmented state ``(u, q, dq)`` covers forcing ``B (q + s dq)``.
    Segment lengths repeat on the symmetric Chebyshev grid, so they are
    cached by value.
    """
    n, m = B.shape
    Z = np.zeros((n + 2 * m, n + 2 * m))
    Z[:n, :n] = -H
    Z[:n, n:n + m] = B
    Z[n:n + m, n + m:] = np.eye(m)
    cache: dict[float, np.ndarray] = {}
    out = []
    for tau in np.diff(grid.points):
        key = float(np.round(tau, 15 - int(np.floor(np.log10(tau)))))
        E = cache.get(key)
        if E is None:
            E = expm_dense(tau * Z)
            cache[key] = E
        out.append(E)
    return out


def propagate_projected(H: np.ndarray, u0: np.ndarray, B: np.ndarray, P: np.ndarray,
                        grid: SampleGrid) -> np.ndarray:
    """Exact solution of ``u' = -H u + B p(t)`` at the grid points.

    ``p`` is piecewise linear with samples ``P[:, j] = p(t_j)``; on each
    segment the variation-of-constants formula is evaluated through one
    augmented matrix exponential.  Returns ``n x n_s`` samples of ``u``.
    """
    n = H.shape[0]
    m = B.shape[1]
    U = np.zeros((n, grid.n_s))
    U[:, 0] = u0
    if n == 0:
        return U
    exps = _segment_exponentials(H, B, grid)
    dt = np.diff(grid.points)
    aug = np.empty(n + 2 * m)
    for j, E in enumerate(exps):
        aug[:n] = U[:, j]
        aug[n:n + m] = P[:, j]
        aug[n + m:] = (P[:, j + 1] - P[:, j]) / dt[j]
        U[:, j + 1] = E[:n] @ aug
    return U


def _propagate_partial(H, u_start, B, q0, dq, tau) -> np.ndarray:
    n, m = B.shape
    if n == 0:
        return u_start
    Z = np.zeros((n + 2 * m, n + 2 * m))
    Z[:n, :n] = -H
    Z[:n, n:n + m] = B
    Z[n:n + m, n + m:] = np.eye(m)
    E = expm_dense(tau * Z)
    return E[:n] @ np.concatenate([u_start, q0, dq])


# --------------------------------------------------------------------------
# Waveform


@dataclass
class WaveformSolution:
    """Compact waveform ``y(t) = offset + V u(t)`` on ``[0, T]``.

    ``u`` solves the projected system ``u' = -H u + B p(t)``, ``u(0) = u0``
    with piecewise-linear ``p`` sampled in ``P``; ``u_samples`` stores
    ``u(t_j)``.  ``res_map`` maps ``u(t)`` to residual coordinates in an
    orthonormal basis, so ``||r(t)|| = ||res_map @ u(t)||``.
    """

    offset: np.ndarray
    V: np.ndarray
    H: np.ndarray
    B: np.ndarray
    u0: np.ndarray
    P: np.ndarray
    grid: SampleGrid
    u_samples: np.ndarray
    res_map: np.ndarray

    @property
    def T(self) -> float:
        return self.grid.T

    @property
    def N(self) -> int:
        return self.offset.shape[0]

    def u_at(self, t: float) -> np.ndarray:
        g = self.grid
        j = g.locate(t)
        tj = g.points[j]
        if t == tj:
            return self.u_samples[:, j]
        if t == g.points[j + 1]:
            return self.u_samples[:, j + 1]
        dt = g.points[j + 1] - tj
        dq = (self.P[:, j + 1] - self.P[:, j]) / dt
        return _propagate_partial(self.H, self.u_samples[:, j], self.B, self.P[:, j], dq, t - tj)

    def __call__(self, t: float) -> np.ndarray:
        return eval_waveform(self, t)

    def samples(self) -> np.ndarray:
        """``N x n_s`` matrix of ``y(t_j)``."""
        return self.offset[:, None] + self.V @ self.u_samples

    def final(self) -> np.ndarray:
        return self.offset + self.V @ self.u_samples[:, -1]


def constant_waveform(v: np.ndarray, grid: SampleGrid) -> WaveformSolution:
    """The waveform ``y(t) = v`` for all ``t``."""
    v = np.asarray(v, dtype=float)
    N = v.shape[0]
    return WaveformSolution(offset=v.copy(), V=np.zeros((N, 0)), H=np.zeros((0, 0)),
                            B=np.zeros((0, 1)), u0=np.zeros(0), P=np.zeros((1, grid.n_s)),
                            grid=grid, u_samples=np.zeros((0, grid.n_s)), res_map=np.zeros((0, 0)))


def eval_waveform(sol: WaveformSolution, t: float) -> np.ndarray:
    if sol.V.shape[1] == 0:
        sol.grid.locate(t)
        return sol.offset.copy()
    return sol.offset + sol.V @ sol.u_at(t)


def linear_residual_norm(sol: WaveformSolution, t: float) -> float:
    """Norm of ``-A y(t) + U p(t) - y'(t)`` from the Arnoldi recurrence."""
    if sol.res_map.size == 0:
        return 0.0
    return float(np.linalg.norm(sol.res_map @ sol.u_at(t)))


def monitor_indices(n_s: int, n_interior: int = 8) -> np.ndarray:
    """Grid indices where the inner residual is checked: ``T`` plus
    ``n_interior`` evenly spread interior points."""
    interior = np.unique(np.linspace(1, n_s - 2, n_interior + 2).round().astype(int)[1:-1])
    return np.concatenate([interior, [n_s - 1]])


# --------------------------------------------------------------------------
# Driver


@dataclass
class _Cycle:
    V: np.ndarray
    Tproj: np.ndarray
    res_map: np.ndarray  # residual coordinates in basis Qr
    Qr: np.ndarray


def _assemble(cycles: list[_Cycle], couplings: list[np.ndarray], first_rows: int, m: int,
              B1: np.ndarray, u01: np.ndarray):
    """Block lower-triangular projected system over all cycles."""
    sizes = [c.V.shape[1] for c in cycles]
    n = sum(sizes)
    H = np.zeros((n, n))
    off = np.cumsum([0] + sizes)
    for i, c in enumerate(cycles):
        H[off[i]:off[i + 1], off[i]:off[i + 1]] = c.Tproj
        if i > 0:
            K = couplings[i]  # rows = start block of cycle i, cols = cycle i-1
            H[off[i]:off[i] + K.shape[0], off[i - 1]:off[i]] = -K
    B = np.zeros((n, m))
    B[:B1.shape[0], :] = B1
    u0 = np.zeros(n)
    u0[:u01.shape[0]] = u01
    V = np.hstack([c.V for c in cycles])
    return V, H, B, u0, off


def ebk_solve(
    A,
    v: np.ndarray,
    S: LowRankSource,
    T: float | None = None,
    stop: float | Callable[[np.ndarray, Callable[[], np.ndarray]], bool] = 1e-6,
    params: EbkParams | None = None,
    factor: Factorization | None = None,
    work: Work | None = None,
) -> tuple[WaveformSolution, EbkInfo]:
    """Solve ``y' = -A y + U p(t)``, ``y(0) = v`` on ``[0, T]``.

    ``stop`` is either an absolute threshold on the inner residual norm at
    the monitoring points (``T`` and interior grid points) or a callable
    ``stop(residual_norms, current_samples) -> bool`` where
    ``current_samples()`` returns the ``N x n_s`` samples of the current
    approximation.  A factorization of ``I + gamma A`` may be passed in to
    share it between solves.

    Raises
    ------
    EbkConvergenceError
        If the stop rule is not met within ``params.max_cycles`` cycles.
    """
    params = params or EbkParams()
    grid = S.grid
    if T is None:
        T = grid.T
    if abs(T - grid.T) > 1e-12 * T:
        raise ValueError("source grid does not cover [0, T]")
    gamma = params.gamma if params.gamma is not None else T / 10.0
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    work = work if work is not None else Work()
    if factor is None:
        factor = factorize_shifted(A, gamma, work=work)
    elif abs(factor.shift - gamma) > 1e-14 * gamma:
        raise ValueError("factorization shift does not match gamma")
    v = np.asarray(v, dtype=float)
    N = v.shape[0]
    m = S.U.shape[1]
    info = EbkInfo(work=work)
    monitors = monitor_indices(grid.n_s, params.n_monitor)

    vnorm = np.linalg.norm(v)
    start = np.column_stack([v, S.U]) if vnorm > 0 else S.U
    first = block_orthonormalize(start, deflation_tol=params.deflation_tol)
    if vnorm > 0:
        u01 = first.R[:, 0]
        B1 = first.R[:, 1:]
    else:
        u01 = np.zeros(first.Q.shape[1])
        B1 = first.R

    if first.Q.shape[1] == 0:
        # zero data: the solution is identically zero
        sol = constant_waveform(np.zeros(N), grid)
        info.converged = True
        info.residual_history.append([0.0])
        return sol, info

    cycles: list[_Cycle] = []
    couplings: list[np.ndarray] = [np.zeros((0, 0))]
    Qstart = first.Q

    def check(state: BlockKrylovState):
        Tproj = state.projected_operator()
        Hsq = state.square()
        if state.exhausted:
            res_map = np.zeros((0, state.n))
            Qr = np.zeros((N, 0))
        else:
            Wn = state.newest()
            AW = Wn + gamma * spmv(A, Wn, work)
            Qr, Rr = np.linalg.qr(AW)
            C = np.linalg.solve(Hsq.T, state.coupling().T).T / gamma
            res_map = Rr @ C
        cyc = _Cycle(V=state.V[:, :state.n], Tproj=Tproj, res_map=res_map, Qr=Qr)
        Vall, H, B, u0, off = _assemble(cycles + [cyc], couplings, first.Q.shape[1], m, B1, u01)
        U = propagate_projected(H, u0, B, S.P, grid)
        u_last = U[off[-2]:off[-1], :]
        rn = np.linalg.norm(res_map @ u_last[:, monitors], axis=0) if res_map.size else np.zeros(len(monitors))
        sol = WaveformSolution(offset=np.zeros(N), V=Vall, H=H, B=B, u0=u0, P=S.P, grid=grid,
                               u_samples=U, res_map=np.hstack([np.zeros((res_map.shape[0], off[-2])), res_map]))
        return cyc, sol, rn

    sol = None
    for cycle_idx in range(params.max_cycles):
        state = _start_state(A, factor, gamma, Qstart, params.deflation_tol)
        history: list[float] = []
        info.residual_history.append(history)
        info.cycles += 1
        done = False
        for _ in range(params.max_steps_per_cycle):
            sai_block_step(state)
            info.steps += 1
            cyc, sol, rn = check(state)
            history.append(float(rn.max()))
            if callable(stop):
                done = bool(stop(rn, sol.samples)) or state.exhausted
            else:
                done = bool(rn.max() <= stop) or state.exhausted
            if done:
                break
        if done:
            info.converged = True
            return sol, info
        # restart: the residual Qr (res_map u(t)) drives a correction problem
        nxt = block_orthonormalize(cyc.Qr, deflation_tol=params.deflation_tol)
        cycles.append(cyc)
        couplings.append(nxt.R @ cyc.res_map)
        Qstart = nxt.Q
        if Qstart.shape[1] == 0:
            info.converged = True
            return sol, info
    raise EbkConvergenceError(f"EBK: no convergence after {params.max_cycles} cycles "
                              f"(residual {info.final_residual:.3e})", sol, info)
