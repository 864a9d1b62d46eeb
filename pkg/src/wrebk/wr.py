"""Nonlinear waveform relaxation driven by the EBK inner solver.

Each outer iteration freezes the splitting at the anchor ``y_k(T)``,
samples ``f_k(y_k(t)) + g(t) - A_k v`` on the Chebyshev grid, compresses it
to low rank and solves the linear correction problem with
:func:`wrebk.ebk.ebk_solve`.  The iteration stops on the nonlinear
residual at ``t = T``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ebk import EbkConvergenceError, EbkParams, WaveformSolution, constant_waveform, ebk_solve
from .source import chebyshev_points, sample_and_compress
from .sparse import Work, factorize_shifted

log = logging.getLogger(__name__)

__all__ = [
    "SplitOde",
    "WrParams",
    "IterationRecord",
    "ConvergenceTrace",
    "WrDivergenceError",
    "wr_solve",
    "wr_solve_windows",
    "nonlinear_residual_final",
    "inner_tolerance",
    "estimate_lipschitz",
]


@dataclass
class SplitOde:
    """An IVP ``y' = Phi(t, y)``, ``y(0) = v`` with the iteration-dependent
    splitting ``Phi(t, y) = -A_k y + f_k(y) + g(t)``.

    ``build_A(anchor)`` and ``f(y, anchor)`` define ``A_k`` and ``f_k`` for
    the anchor state ``y_k(T)``; ``f`` accepts a single state or an
    ``N x n`` array of states (one per column).  ``residual_final``, when
    given, is a closed form of ``f_k(y_{k+1}(T)) - f_k(y_k(T))`` with
    signature ``(y_next_T, y_curr_T, anchor)``.  ``t0`` shifts the time
    origin of ``g`` and ``rhs`` (used for time windows).
    """

    name: str
    v: np.ndarray
    T: float
    build_A: Callable[[np.ndarray], object]
    f: Callable[[np.ndarray, np.ndarray], np.ndarray]
    g: Callable[[float], np.ndarray]
    jacobian: Callable[[float, np.ndarray], object] | None = None
    residual_final: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    phi: Callable[[float, np.ndarray], np.ndarray] | None = None
    g_constant: bool = False
    t0: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.v.shape[0]

    def source(self, t: float) -> np.ndarray:
        return self.g(self.t0 + t)

    def rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        """``Phi(t, y)`` in window-local time."""
        if self.phi is not None:
            return self.phi(self.t0 + t, y)
        A = self.build_A(y)
        return -(A @ y) + self.f(y, y) + self.source(t)

    def jac(self, t: float, y: np.ndarray):
        if self.jacobian is None:
            raise NotImplementedError(f"{self.name}: no Jacobian supplied")
        return self.jacobian(self.t0 + t, y)

    def window(self, t0: float, T: float, v: np.ndarray) -> "SplitOde":
        """The same ODE on ``[t0, t0 + T]`` (absolute time) from state ``v``."""
        return dataclasses.replace(self, v=np.asarray(v, dtype=float).copy(), T=float(T), t0=float(t0))


@dataclass
class WrParams:
    tol: float = 1e-3
    stop_mode: str = "absolute"          # absolute | relative
    m: int = 7
    m_first: int = 1
    n_s: int = 100
    krylov_dim: int = 10
    gamma: float | None = None           # default T/10
    max_outer: int = 100
    max_cycles: int = 30
    inner_stop_mode: str = "absolute"    # absolute | scaled
    rank_tol: float = 1e-12
    inner_stop: Callable | None = None   # overrides inner_stop_mode

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.stop_mode not in ("absolute", "relative"):
            raise ValueError(f"stop_mode must be absolute|relative, got {self.stop_mode!r}")
        if self.inner_stop_mode not in ("absolute", "scaled"):
            raise ValueError(f"inner_stop_mode must be absolute|scaled, got {self.inner_stop_mode!r}")
        if not 1 <= self.m <= self.n_s:
            raise ValueError("need 1 <= m <= n_s")


@dataclass
class IterationRecord:
    k: int
    resnorm: float
    resnorm_generic: float
    rel_error: float | None
    inner_steps: int
    inner_cycles: int
    lu: int
    lu_applications: int
    matvecs: int
    sigma_next: float
    inner_tol: float
    inner_residual: float
    window: int = 0


@dataclass
class ConvergenceTrace:
    """Per-iteration history; counters are cumulative."""

    records: list[IterationRecord] = field(default_factory=list)
    threshold: float = float("nan")
    converged: bool = False
    work: Work = field(default_factory=Work)
    wall_time: float = 0.0

    @property
    def iterations(self) -> int:
        """Number of linear IVP solves (one factorization each)."""
        return sum(1 for r in self.records if r.k > 0)

    @property
    def final_resnorm(self) -> float:
        return self.records[-1].resnorm

    def resnorms(self) -> np.ndarray:
        return np.array([r.resnorm for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        names = [f.name for f in dataclasses.fields(IterationRecord)]
        w = csv.writer(buf)
        w.writerow(names)
        for r in self.records:
            w.writerow(["" if getattr(r, n) is None else getattr(r, n) for n in names])
        return buf.getvalue()


class WrDivergenceError(RuntimeError):
    """Outer iteration did not reach the tolerance; carries the trace."""

    def __init__(self, msg: str, trace: ConvergenceTrace, solution: WaveformSolution | None = None):
        super().__init__(msg)
        self.trace = trace
        self.solution = solution


def nonlinear_residual_final(y_next: WaveformSolution, y_curr: WaveformSolution, problem: SplitOde,
                             anchor: np.ndarray, generic: bool = False) -> np.ndarray:
    """``r_{k+1}(T) = f_k(y_{k+1}(T)) - f_k(y_k(T))``.

    The problem's closed form is used when available unless ``generic``.
    """
    yn, yc = y_next.final(), y_curr.final()
    if problem.residual_final is not None and not generic:
        return problem.residual_final(yn, yc, anchor)
    return problem.f(yn, anchor) - problem.f(yc, anchor)


def inner_tolerance(mode: str, problem: SplitOde, y_curr: WaveformSolution | np.ndarray,
                    tol: float, anchor: np.ndarray | None = None) -> float:
    """Inner EBK residual tolerance.

    ``absolute``: ``tol``.  ``scaled``: ``||f_k(y_k(0)) + g(0)|| * tol / 10``,
    floored at ``1e-12 * tol`` so a vanishing source never gives a zero
    target.
    """
    if mode == "absolute":
        return tol
    if mode != "scaled":
        raise ValueError(f"unknown inner stop mode {mode!r}")
    y0 = y_curr(0.0) if isinstance(y_curr, WaveformSolution) else np.asarray(y_curr)
    if anchor is None:
        anchor = y_curr.final() if isinstance(y_curr, WaveformSolution) else y0
    val = np.linalg.norm(problem.f(y0, anchor) + problem.source(0.0)) * tol / 10.0
    return max(float(val), 1e-12 * tol)


def _rel_err(y, y_ref):
    return float(np.linalg.norm(y - y_ref) / np.linalg.norm(y_ref))


def wr_solve(problem: SplitOde, params: WrParams | None = None, y_ref: np.ndarray | None = None,
             trace: ConvergenceTrace | None = None, window: int = 0
             ) -> tuple[WaveformSolution, ConvergenceTrace]:
    """Run nonlinear waveform relaxation on ``[0, problem.T]``.

    Raises
    ------
    WrDivergenceError
        If ``params.max_outer`` iterations do not reach the tolerance.
    """
    params = params or WrParams()
    t_start = time.perf_counter()
    trace = trace if trace is not None else ConvergenceTrace()
    work = trace.work
    T = problem.T
    v = np.asarray(problem.v, dtype=float)
    grid = chebyshev_points(params.n_s, T)
    gamma = params.gamma if params.gamma is not None else T / 10.0
    ebk_params = EbkParams(gamma=gamma, max_steps_per_cycle=params.krylov_dim, max_cycles=params.max_cycles)

    y_curr = constant_waveform(v, grid)
    r0 = float(np.linalg.norm(problem.rhs(T, v)))
    work.fevals += 1
    threshold = params.tol if params.stop_mode == "absolute" else params.tol * r0
    trace.threshold = threshold
    trace.records.append(IterationRecord(
        k=0, resnorm=r0, resnorm_generic=r0,
        rel_error=None if y_ref is None else _rel_err(v, y_ref),
        inner_steps=0, inner_cycles=0, lu=work.lu, lu_applications=work.lu_applications,
        matvecs=work.matvecs, sigma_next=0.0, inner_tol=0.0, inner_residual=0.0, window=window))
    if r0 <= threshold:
        trace.converged = True
        trace.wall_time += time.perf_counter() - t_start
        return y_curr, trace

    for k in range(params.max_outer):
        anchor = y_curr.final()
        A_k = problem.build_A(anchor)
        factor = factorize_shifted(A_k, gamma, work=work)
        Y = y_curr.samples()
        G = problem.f(Y, anchor) + np.column_stack([problem.source(t) for t in grid.points])
        G -= (A_k @ v)[:, None]
        work.matvecs += 1
        m_k = params.m_first if k == 0 else params.m
        S = sample_and_compress(G, grid, m_k, rank_tol=params.rank_tol)

        if params.inner_stop is not None:
            stop = params.inner_stop(problem, y_curr, anchor, v)
            tol_lin = float("nan")
        else:
            tol_lin = inner_tolerance(params.inner_stop_mode, problem, y_curr, params.tol, anchor)
            stop = tol_lin
        try:
            z, info = ebk_solve(A_k, np.zeros_like(v), S, T, stop=stop, params=ebk_params,
                                factor=factor, work=work)
        except EbkConvergenceError as exc:
            log.warning("inner solver stalled at outer iteration %d: %s", k + 1, exc)
            z, info = exc.solution, exc.info
        y_next = dataclasses.replace(z, offset=v.copy())

        rvec = nonlinear_residual_final(y_next, y_curr, problem, anchor)
        rgen = nonlinear_residual_final(y_next, y_curr, problem, anchor, generic=True)
        resnorm = float(np.linalg.norm(rvec))
        trace.records.append(IterationRecord(
            k=k + 1, resnorm=resnorm, resnorm_generic=float(np.linalg.norm(rgen)),
            rel_error=None if y_ref is None else _rel_err(y_next.final(), y_ref),
            inner_steps=info.steps, inner_cycles=info.cycles, lu=work.lu,
            lu_applications=work.lu_applications, matvecs=work.matvecs,
            sigma_next=S.sigma_next / S.sigma[0] if S.sigma.size and S.sigma[0] > 0 else 0.0,
            inner_tol=tol_lin, inner_residual=info.final_residual, window=window))
        log.info("%s k=%d resnorm=%.3e inner steps=%d", problem.name, k + 1, resnorm, info.steps)
        y_curr = y_next
        if not np.isfinite(resnorm):
            break
        if resnorm <= threshold:
            trace.converged = True
            trace.wall_time += time.perf_counter() - t_start
            return y_curr, trace
    trace.wall_time += time.perf_counter() - t_start
    raise WrDivergenceError(f"{problem.name}: no convergence in {params.max_outer} outer iterations "
                            f"(resnorm {trace.final_resnorm:.3e}, threshold {threshold:.3e})", trace, y_curr)


def wr_solve_windows(problem: SplitOde, params: WrParams | None = None, windows: int = 1,
                     y_ref: np.ndarray | None = None
                     ) -> tuple[list[WaveformSolution], ConvergenceTrace]:
    """Split ``[0, T]`` into equal windows and chain WR runs, each starting
    from the previous window's final state.  Iteration counts accumulate
    in one trace.  ``y_ref`` is the reference at the final time."""
    if windows < 1:
        raise ValueError("windows must be >= 1")
    trace = ConvergenceTrace()
    dt = problem.T / windows
    v = problem.v
    sols = []
    all_converged = True
    for w in range(windows):
        sub = problem.window(problem.t0 + w * dt, dt, v)
        ref = y_ref if w == windows - 1 else None
        sol, trace = wr_solve(sub, params, y_ref=ref, trace=trace, window=w)
        all_converged &= trace.converged
        sols.append(sol)
        v = sol.final()
    trace.converged = all_converged
    return sols, trace


def estimate_lipschitz(f: Callable[[np.ndarray, np.ndarray], np.ndarray], anchor: np.ndarray,
                       states: np.ndarray, n_pairs: int = 50, scale: float = 1e-2,
                       seed: int = 0) -> float:
    """Sampled Lipschitz estimate of ``f(., anchor)`` near the given states
    (columns of ``states``): max of ``||f(u)-f(w)|| / ||u-w||`` over random
    perturbation pairs."""
    rng = np.random.default_rng(seed)
    states = np.atleast_2d(states.T).T
    best = 0.0
    for _ in range(n_pairs):
        y = states[:, rng.integers(states.shape[1])]
        d = rng.standard_normal(y.shape) * scale * max(np.linalg.norm(y) / np.sqrt(y.size), 1e-12)
        u, w = y + d, y - d
        num = np.linalg.norm(f(u, anchor) - f(w, anchor))
        best = max(best, num / np.linalg.norm(u - w))
    return float(best)
