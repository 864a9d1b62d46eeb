"""Sparse operators and the factorize-once / apply-many solve contract."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg.lapack as lapack
import scipy.sparse as sp
import scipy.sparse.linalg as spla

__all__ = [
    "FactorizationError",
    "Work",
    "Factorization",
    "as_csr",
    "tridiag",
    "spmv",
    "factorize_shifted",
    "apply_factored",
    "one_norm",
    "omega_estimate",
    "write_matrix_market",
]


class FactorizationError(RuntimeError):
    """Raised when a shifted matrix is numerically singular."""


@dataclass
class Work:
    """Work counters in the units of the result tables.

    ``lu`` counts factorizations, ``lu_applications`` counts single
    right-hand-side solves, ``matvecs`` counts sparse matrix-vector
    products and ``fevals`` counts right-hand-side evaluations.
    """

    lu: int = 0
    lu_applications: int = 0
    matvecs: int = 0
    fevals: int = 0

    def add(self, other: "Work") -> None:
        self.lu += other.lu
        self.lu_applications += other.lu_applications
        self.matvecs += other.matvecs
        self.fevals += other.fevals

    def copy(self) -> "Work":
        return Work(self.lu, self.lu_applications, self.matvecs, self.fevals)


def as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    return A


def tridiag(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray) -> sp.dia_matrix:
    """Tridiagonal matrix with ``M[i+1, i] = lower[i]``, ``M[i, i] = diag[i]``,
    ``M[i, i+1] = upper[i]``."""
    n = diag.shape[0]
    data = np.zeros((3, n))
    data[0, :-1] = lower
    data[1] = diag
    data[2, 1:] = upper
    return sp.dia_matrix((data, [-1, 0, 1]), shape=(n, n))


def _bandwidth(A) -> int:
    if A.format == "dia":
        keep = np.any(A.data != 0, axis=1)
        return int(np.max(np.abs(A.offsets[keep]))) if keep.any() else 0
    coo = A.tocoo()
    return int(np.max(np.abs(coo.row - coo.col))) if coo.nnz else 0


def spmv(A, x: np.ndarray, work: Work | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: matrix {A.shape}, vector {x.shape}")
    if work is not None:
        work.matvecs += 1 if x.ndim == 1 else x.shape[1]
    return A @ x


class _TridiagonalLU:
    """LAPACK ``gttrf``/``gttrs`` factors of a tridiagonal matrix."""

    def __init__(self, dl: np.ndarray, d: np.ndarray, du: np.ndarray):
        dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise FactorizationError(f"zero pivot in tridiagonal factorization (info={info})")
        self._f = (dl, d, du, du2, ipiv)
        self.pivots = np.abs(d)

    def solve(self, B: np.ndarray) -> np.ndarray:
        x, info = lapack.dgttrs(*self._f, B)
        return x


@dataclass
class Factorization:
    """LU factors of ``I + shift * A`` (``I - shift * A`` for ``sign=-1``).

    The handle is read-only after construction.  Solves are counted in
    ``work.lu_applications``, one per right-hand side column.
    """

    shift: float
    sign: int
    n: int
    lu: object
    work: Work = field(default_factory=Work)

    def solve(self, B: np.ndarray) -> np.ndarray:
        return apply_factored(self, B)


def factorize_shifted(A, shift: float, work: Work | None = None, sign: int = 1) -> Factorization:
    """Factor ``I + sign * shift * A`` once for repeated solves.

    Raises
    ------
    FactorizationError
        If the shifted matrix is singular.
    """
    if shift <= 0:
        raise ValueError("shift must be positive")
    if not sp.issparse(A):
        A = sp.csr_matrix(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"square matrix expected, got {A.shape}")
    s = sign * shift
    # tridiagonal (1D stencils): banded elimination; otherwise sparse LU.
    # The stencil matrices here are structurally symmetric, so a minimum
    # degree order on A^T + A with diagonal-preferring pivoting keeps the
    # fill about half of what a column order gives.
    if n >= 3 and _bandwidth(A) <= 1:
        d = 1.0 + s * A.diagonal()
        lo = s * A.diagonal(-1) if n > 1 else np.zeros(0)
        up = s * A.diagonal(1) if n > 1 else np.zeros(0)
        lu = _TridiagonalLU(lo, d, up)
        u_diag = lu.pivots
    else:
        M = (sp.identity(n, format="csc") + s * sp.csc_matrix(A, dtype=float)).tocsc()
        try:
            lu = spla.splu(M, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
        except RuntimeError as exc:  # "Factor is exactly singular"
            raise FactorizationError(str(exc)) from exc
        u_diag = np.abs(lu.U.diagonal())
    if u_diag.size and (not np.all(np.isfinite(u_diag)) or u_diag.min() <= 1e-14 * max(u_diag.max(), 1.0)):
        raise FactorizationError("zero pivot in shifted factorization")
    if work is None:
        work = Work()
    work.lu += 1
    return Factorization(shift=float(shift), sign=sign, n=n, lu=lu, work=work)


def apply_factored(F: Factorization, B: np.ndarray) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.shape[0] != F.n:
        raise ValueError(f"dimension mismatch: factorization n={F.n}, rhs {B.shape}")
    F.work.lu_applications += 1 if B.ndim == 1 else B.shape[1]
    return F.lu.solve(B)


def one_norm(A) -> float:
    """Induced 1-norm (maximum absolute column sum)."""
    if sp.issparse(A):
        return float(abs(A).sum(axis=0).max()) if A.nnz else 0.0
    return float(np.abs(np.asarray(A)).sum(axis=0).max())


def omega_estimate(S, shift: float | None = None, tol: float = 1e-3, maxiter: int = 500,
                   seed: int = 0) -> float:
    """Smallest eigenvalue of the symmetric matrix ``S``.

    ``S`` is typically the symmetric part ``(A + A^T)/2``.  Power iteration
    on ``(I + shift*S)^{-1}`` converges to the eigenvector of the smallest
    eigenvalue; its Rayleigh quotient on ``S`` is returned once it changes
    by less than ``tol`` (relative) between sweeps.

    Raises
    ------
    RuntimeError
        If the iteration does not settle within ``maxiter`` sweeps.
    """
    S = as_csr(S)
    n = S.shape[0]
    if shift is None:
        # large shift: (I+sS)^{-1} ~ S^{-1}/s, plain inverse iteration
        shift = 1e6 / max(one_norm(S), 1e-300) * n
    F = factorize_shifted(S, shift)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam_old = np.inf
    for _ in range(maxiter):
        x = F.solve(x)
        x /= np.linalg.norm(x)
        lam = float(x @ (S @ x))
        if abs(lam - lam_old) <= tol * 1e-3 * max(abs(lam), 1e-300):
            return lam
        lam_old = lam
    raise RuntimeError("omega_estimate: power iteration did not converge")


def write_matrix_market(path: str | Path, A, comment: str = "") -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
