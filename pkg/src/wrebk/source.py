"""Sampling of a time-dependent source on a Chebyshev grid and its low-rank
compression ``g(t) ~ U p(t)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .kernels import thin_svd

__all__ = ["SampleGrid", "LowRankSource", "chebyshev_points", "sample_and_compress", "eval_source"]


@dataclass(frozen=True)
class SampleGrid:
    """Sample points ``0 = t_1 < ... < t_ns = T``."""

    points: np.ndarray
    T: float

    @property
    def n_s(self) -> int:
        return len(self.points)

    def locate(self, t: float) -> int:
        """Index ``j`` of the subinterval ``[t_j, t_{j+1}]`` containing ``t``."""
        if t < 0.0 or t > self.T * (1 + 1e-14):
            raise ValueError(f"t={t} outside [0, {self.T}]")
        j = int(np.searchsorted(self.points, t, side="right")) - 1
        return min(max(j, 0), self.n_s - 2)


def chebyshev_points(n_s: int, T: float) -> SampleGrid:
    """End points plus the ``n_s - 2`` Chebyshev roots mapped to ``[0, T]``."""
    if n_s < 3:
        raise ValueError("need at least 3 sample points")
    if T <= 0:
        raise ValueError("T must be positive")
    j = np.arange(2, n_s)
    interior = 0.5 * T * (1.0 - np.cos(np.pi * (j - 1.5) / (n_s - 2)))
    pts = np.concatenate(([0.0], interior, [T]))
    return SampleGrid(points=pts, T=float(T))


@dataclass
class LowRankSource:
    """Factored source ``U p(t)``; ``P[:, j]`` holds ``p(t_j)``.

    Singular values are folded into ``P`` so ``U`` stays orthonormal.
    ``sigma_next`` is the first discarded singular value (0 if none).
    """

    U: np.ndarray
    P: np.ndarray
    grid: SampleGrid
    sigma: np.ndarray
    sigma_next: float

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def at(self, t: float) -> np.ndarray:
        return eval_source(self, t)


def sample_and_compress(
    source: Callable[[float], np.ndarray] | np.ndarray,
    grid: SampleGrid,
    m: int,
    rank_tol: float = 0.0,
) -> LowRankSource:
    """Sample ``source`` on ``grid`` and keep the ``m`` leading singular triplets.

    ``source`` is either a callback ``t -> vector`` or an already sampled
    ``N x n_s`` matrix.  Singular values at or below ``rank_tol * sigma_1``
    are dropped as well, so an exactly low-rank source gives a smaller rank.
    """
    if m < 1 or m > grid.n_s:
        raise ValueError(f"rank m={m} must be in [1, n_s={grid.n_s}]")
    if callable(source):
        G = np.column_stack([np.asarray(source(t), dtype=float) for t in grid.points])
    else:
        G = np.asarray(source, dtype=float)
        if G.shape[1] != grid.n_s:
            raise ValueError("sampled source must have n_s columns")
    if G.shape[0] < G.shape[1]:
        # wide: factor the transpose, roles of U and V swap
        Vt_T, S, U_T = thin_svd(G.T)
        U, Vt = U_T.T, Vt_T.T
    else:
        U, S, Vt = thin_svd(G)
    keep = m
    if S.size and S[0] > 0 and rank_tol > 0:
        keep = min(keep, max(1, int(np.sum(S > rank_tol * S[0]))))
    keep = min(keep, S.size)
    if S.size == 0 or S[0] == 0.0:
        # zero source: keep one harmless direction with zero coefficients
        U1 = np.zeros((G.shape[0], 1))
        U1[0, 0] = 1.0
        return LowRankSource(U1, np.zeros((1, grid.n_s)), grid, S, 0.0)
    sigma_next = float(S[keep]) if keep < S.size else 0.0
    P = S[:keep, None] * Vt[:keep, :]
    return LowRankSource(U[:, :keep].copy(), P, grid, S, sigma_next)


def eval_source(S: LowRankSource, t: float) -> np.ndarray:
    """Coefficients ``p(t)``, linearly interpolated between samples."""
    j = S.grid.locate(t)
    t0, t1 = S.grid.points[j], S.grid.points[j + 1]
    w = (t - t0) / (t1 - t0)
    return (1.0 - w) * S.P[:, j] + w * S.P[:, j + 1]
