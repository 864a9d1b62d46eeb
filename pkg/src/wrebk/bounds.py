"""Convergence-bound calculators for nonlinear waveform relaxation.

All bounds are in terms of ``C`` and ``omega`` with
``||exp(-tA_k)|| <= C exp(-omega t)``, the Lipschitz constant ``L`` of
``f_k`` and the interval length ``T``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import scipy.integrate as si

from .kernels import phi_scalar

__all__ = [
    "BoundInputs",
    "BoundError",
    "linear_rate",
    "superlinear_bound",
    "residual_to_error",
    "error_to_residual",
    "inexact_rate",
]


class BoundError(ValueError):
    """A bound is requested outside the range where it is defined."""


@dataclass(frozen=True)
class BoundInputs:
    C: float = 1.0
    L: float = 1.0
    omega: float = 0.0
    T: float = 1.0
    eta: float = 0.0
    delta: float | None = None

    def __post_init__(self):
        for name in ("C", "L", "omega", "T", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


def _t_phi1(omega: float, t: float) -> float:
    # t * phi_1(-omega t) = integral_0^t exp(-omega s) ds
    return t * phi_scalar(1, -omega * t)


def linear_rate(b: BoundInputs, t: float | None = None) -> tuple[float, bool]:
    """Contraction factor ``C L t phi_1(-omega t)`` (``t = T`` by default)
    and whether it is below one."""
    t = b.T if t is None else t
    rate = b.C * b.L * _t_phi1(b.omega, t)
    return rate, rate < 1.0


def superlinear_bound(b: BoundInputs, k: int, eps0_max: float, t: float) -> tuple[float, float]:
    """Error bound after ``k`` iterations.

    Returns ``((CL)^k t^k e^{-omega t} phi_k(omega t) * eps0_max,
    (CL)^k t^k / k! * eps0_max)``; the first value is never larger.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cl_t = b.C * b.L * t
    corollary = cl_t ** k / math.factorial(k) * eps0_max
    if k > 8 or b.omega * t > 500.0:
        # phi_k beyond the kernel's range, or e^{wt} about to overflow:
        # integrate the defining integral instead
        tight = _superlinear_direct(b, k, t) * eps0_max
    else:
        tight = cl_t ** k * math.exp(-b.omega * t) * phi_scalar(k, b.omega * t) * eps0_max
    return tight, corollary


def _superlinear_direct(b: BoundInputs, k: int, t: float) -> float:
    # t^k e^{-wt} phi_k(wt) = int_0^t e^{-w s} s^{k-1}/(k-1)! ds
    w = b.omega
    val, _ = si.quad(lambda s: math.exp(-w * s) * s ** (k - 1) / math.factorial(k - 1), 0.0, t,
                     epsabs=0.0, epsrel=1e-12)
    return (b.C * b.L) ** k * val


def residual_to_error(b: BoundInputs, t: float, max_res: float) -> tuple[float, float | None]:
    """Error bound from the nonlinear residual.

    Returns ``(C t phi_1 / (1 - C L t phi_1) * max_res, delta/((1-delta) L) * max_res)``;
    the second entry is ``None`` when ``delta`` is not given.

    Raises
    ------
    BoundError
        If ``C L t phi_1(-omega t) >= 1``.
    """
    tp = _t_phi1(b.omega, t)
    q = b.C * b.L * tp
    if q >= 1.0:
        raise BoundError(f"C L t phi_1(-omega t) = {q:.4g} >= 1: bound undefined")
    first = b.C * tp / (1.0 - q) * max_res
    coarse = None
    if b.delta is not None and b.L > 0:
        coarse = b.delta / ((1.0 - b.delta) * b.L) * max_res
    return first, coarse


def error_to_residual(b: BoundInputs, t: float, max_err_prev: float) -> tuple[float, float | None]:
    """Residual bound from the previous iteration's error.

    Returns ``((1 + C L t phi_1) L * err, (1 + delta) L * err)``; the
    second entry (``< 2 L err``) is ``None`` without ``delta``.
    """
    q = b.C * b.L * _t_phi1(b.omega, t)
    first = (1.0 + q) * b.L * max_err_prev
    second = None if b.delta is None else (1.0 + b.delta) * b.L * max_err_prev
    return first, second


def inexact_rate(delta: float, eta: float) -> tuple[float, bool]:
    """Contraction ``delta (1+eta) / (1 - delta eta)`` of the inexact
    iteration; convergent iff ``eta < (1 - delta) / (2 delta)``."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if not 0.0 <= eta < 1.0:
        raise ValueError("eta must lie in [0, 1)")
    rate = delta * (1.0 + eta) / (1.0 - delta * eta)
    return rate, eta < (1.0 - delta) / (2.0 * delta)
