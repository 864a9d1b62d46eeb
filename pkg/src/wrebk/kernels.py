"""Small dense kernels: phi-functions, matrix exponential, thin SVD and
block orthonormalization with deflation."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

__all__ = [
    "phi_scalar",
    "expm_dense",
    "thin_svd",
    "block_orthonormalize",
    "OrthoResult",
]

# Below this |z| (negative z only) the recurrence loses digits for j <= 8.
_NEG_TAYLOR_SWITCH = 4.0
_MAX_ORDER = 8


def _phi_taylor(j: int, z: float) -> float:
    # sum_k z^k / (k+j)!, stop once terms stop contributing
    term = 1.0 / math.factorial(j)
    total = term
    k = 0
    while True:
        k += 1
        term *= z / (k + j)
        total += term
        if k >= 20 and abs(term) <= 1e-18 * abs(total):
            return total
        if k > 400:
            return total


def phi_scalar(j: int, z: float) -> float:
    """Evaluate ``phi_j(z)`` for real ``z``.

    ``phi_0(z) = exp(z)`` and ``phi_{j+1}(z) = (phi_j(z) - 1/j!) / z``.
    The upward recurrence is only used where it is stable (large negative
    ``z``); elsewhere a Taylor series is summed.  For ``z >= 0`` all series
    terms are positive, so the series never cancels.
    """
    if j < 0 or j > _MAX_ORDER:
        raise ValueError(f"phi order must be in [0, {_MAX_ORDER}], got {j}")
    z = float(z)
    if not math.isfinite(z):
        raise ValueError("phi_scalar needs a finite argument")
    if j == 0:
        return math.exp(z)
    if z >= 0.0 or -z < _NEG_TAYLOR_SWITCH:
        return _phi_taylor(j, z)
    val = math.exp(z)
    for i in range(j):
        val = (val - 1.0 / math.factorial(i)) / z
    return val


def expm_dense(M: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade kernel.

    Raises
    ------
    OverflowError
        If the result is not representable in double precision.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expm_dense needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("expm_dense needs finite entries")
    with np.errstate(over="ignore", invalid="ignore"):
        E = sla.expm(M)
    if not np.all(np.isfinite(E)):
        raise OverflowError("matrix exponential overflows double precision")
    return E


def thin_svd(G: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD ``G = U @ diag(S) @ Vt`` of a tall matrix, ``S`` descending."""
    G = np.asarray(G, dtype=float)
    if G.ndim != 2:
        raise ValueError("thin_svd needs a 2-D array")
    if G.shape[0] < G.shape[1]:
        raise ValueError(f"thin_svd needs a tall matrix, got shape {G.shape}")
    # LinAlgError from LAPACK is the convergence-failure signal
    U, S, Vt = np.linalg.svd(G, full_matrices=False)
    return U, S, Vt


class OrthoResult(NamedTuple):
    """Result of :func:`block_orthonormalize`.

    ``B - against @ coeffs == Q @ R`` up to roundoff and the dropped
    (numerically dependent) columns.  ``R`` has one row per kept column of
    ``Q`` and one column per column of ``B``.
    """

    Q: np.ndarray
    R: np.ndarray
    coeffs: np.ndarray
    deflated: list[int]


def block_orthonormalize(
    B: np.ndarray,
    against: np.ndarray | None = None,
    deflation_tol: float = 1e-10,
) -> OrthoResult:
    """Orthonormalize the columns of ``B``, optionally against an existing
    orthonormal basis.

    Block classical Gram-Schmidt against ``against`` is applied twice, then
    the block itself is processed column by column with one
    reorthogonalization pass.  A column whose norm drops below
    ``deflation_tol`` times its norm on entry is numerically dependent and
    is dropped; its index is reported in ``deflated``.
    """
    B = np.array(B, dtype=float, copy=True)
    if B.ndim == 1:
        B = B[:, None]
    n, p = B.shape
    ref = np.maximum(np.linalg.norm(B, axis=0), 1e-300)
    if against is not None and against.shape[1] > 0:
        C = against.T @ B
        B -= against @ C
        C2 = against.T @ B
        B -= against @ C2
        coeffs = C + C2
    else:
        coeffs = np.zeros((0, p))
    q_cols: list[np.ndarray] = []
    r_rows: list[np.ndarray] = []
    deflated: list[int] = []
    for i in range(p):
        w = B[:, i].copy()
        r = np.zeros(p)
        for _ in range(2):
            for q_idx, q in enumerate(q_cols):
                c = q @ w
                w -= c * q
                r_rows[q_idx][i] += c
            if against is not None and against.shape[1] > 0:
                c = against.T @ w
                w -= against @ c
                coeffs[:, i] += c
        nrm = np.linalg.norm(w)
        if nrm <= deflation_tol * ref[i] or nrm == 0.0:
            deflated.append(i)
            continue
        r[i] = nrm
        q_cols.append(w / nrm)
        r_rows.append(r)
    if q_cols:
        Q = np.column_stack(q_cols)
        R = np.vstack(r_rows)
    else:
        Q = np.zeros((n, 0))
        R = np.zeros((0, p))
    return OrthoResult(Q, R, coeffs, deflated)
