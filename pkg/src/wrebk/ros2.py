"""Two-stage Rosenbrock method ROS2, self-verified reference solutions and
the relative error metric."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .sparse import Work, factorize_shifted

log = logging.getLogger(__name__)

__all__ = [
    "GAMMA_L_STABLE",
    "Ros2Config",
    "Ros2Result",
    "ros2_stability",
    "ros2_integrate",
    "reference_solution",
    "relative_error",
]

GAMMA_L_STABLE = 1.0 + 1.0 / math.sqrt(2.0)


@dataclass
class Ros2Config:
    steps: int
    gamma: float = GAMMA_L_STABLE

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("ROS2 needs at least one step")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


@dataclass
class Ros2Result:
    y: np.ndarray
    steps: int
    work: Work = field(default_factory=Work)


def ros2_stability(z: complex, gamma: float = GAMMA_L_STABLE) -> complex:
    """Stability function ``R(z)`` of the scheme on ``y' = lambda y``."""
    return (1 + (1 - 2 * gamma) * z + (gamma**2 - 2 * gamma + 0.5) * z**2) / (1 - gamma * z) ** 2


def ros2_integrate(rhs: Callable[[float, np.ndarray], np.ndarray], jac: Callable[[float, np.ndarray], object],
                   v: np.ndarray, T: float, steps: int, gamma: float = GAMMA_L_STABLE,
                   work: Work | None = None) -> Ros2Result:
    """Fixed-step ROS2 on ``[0, T]``.

    Per step: ``(I - gamma tau J) k1 = Phi(t_l, y)``,
    ``(I - gamma tau J) k2 = Phi(t_{l+1}, y + tau k1) - 2 k1`` and
    ``y <- y + 3/2 tau k1 + 1/2 tau k2`` with the exact Jacobian ``J`` at
    ``(t_l, y)``.  One factorization and two solves per step.
    """
    Ros2Config(steps, gamma)
    work = work if work is not None else Work()
    tau = T / steps
    y = np.array(v, dtype=float, copy=True)
    for l in range(steps):
        t = l * tau
        F = factorize_shifted(jac(t, y), gamma * tau, work=work, sign=-1)
        k1 = F.solve(rhs(t, y))
        k2 = F.solve(rhs(t + tau, y + tau * k1) - 2.0 * k1)
        work.fevals += 2
        y = y + 1.5 * tau * k1 + 0.5 * tau * k2
        if not np.all(np.isfinite(y)):
            raise FloatingPointError(f"ROS2 blew up at step {l + 1}")
    return Ros2Result(y=y, steps=steps, work=work)


def relative_error(y: np.ndarray, y_ref: np.ndarray) -> float:
    """``||y - y_ref|| / ||y_ref||`` in the 2-norm."""
    nref = np.linalg.norm(y_ref)
    if nref == 0.0:
        raise ValueError("reference solution is zero")
    return float(np.linalg.norm(np.asarray(y) - y_ref) / nref)


@dataclass
class ReferenceResult:
    y: np.ndarray
    steps: int
    history: list[tuple[int, float]]
    work: Work


def reference_solution(rhs, jac, v: np.ndarray, T: float, target_accuracy: float = 1e-8,
                       start_steps: int = 64, max_steps: int = 2**16) -> ReferenceResult:
    """ROS2 with the step halved until two successive answers differ by
    less than ``target_accuracy / 10`` relative; returns the finer one.

    ``history`` holds ``(steps, ||y_tau - y_{tau/2}|| / ||y_{tau/2}||)``.

    Raises
    ------
    RuntimeError
        If ``max_steps`` is exceeded first.
    """
    if target_accuracy < 1e-10:
        raise ValueError("target_accuracy below 1e-10 is out of reach for ROS2 in double precision")
    work = Work()
    steps = start_steps
    prev = ros2_integrate(rhs, jac, v, T, steps, work=work).y
    history: list[tuple[int, float]] = []
    while steps < max_steps:
        steps *= 2
        cur = ros2_integrate(rhs, jac, v, T, steps, work=work).y
        diff = relative_error(prev, cur)
        history.append((steps, diff))
        log.info("reference: %d steps, successive difference %.3e", steps, diff)
        if diff < target_accuracy / 10.0:
            return ReferenceResult(y=cur, steps=steps, history=history, work=work)
        prev = cur
    raise RuntimeError(f"reference_solution: no agreement to {target_accuracy:g} within {max_steps} steps")
