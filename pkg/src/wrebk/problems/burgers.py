"""1D viscous Burgers equation ``u_t = nu u_xx - u u_x`` on ``[0, 1]``.

Homogeneous Dirichlet data, ``u(x, 0) = 3/2 x (1-x)^2``.  Convection is
discretized as ``1/3 u u_x + 2/3 (u^2/2)_x`` with central differences,
which gives ``A_skew(y) y`` with an exactly skew-symmetric ``A_skew(y)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..sparse import tridiag
from ..wr import SplitOde

__all__ = ["BurgersProblem", "burgers_build"]


@dataclass
class BurgersProblem:
    N: int
    nu: float

    def __post_init__(self):
        if self.N < 3:
            raise ValueError("Burgers grid needs N >= 3")
        if self.nu <= 0:
            raise ValueError("viscosity must be positive")
        self.dx = 1.0 / (self.N + 1)
        self.x = self.dx * np.arange(1, self.N + 1)
        c = self.nu / self.dx**2
        self._c = c
        off = np.full(self.N - 1, -c)
        self.A_symm = tridiag(off, np.full(self.N, 2 * c), off).tocsr()

    def initial(self) -> np.ndarray:
        return 1.5 * self.x * (1.0 - self.x) ** 2

    def A_skew(self, y: np.ndarray) -> sp.csr_matrix:
        w = (y[:-1] + y[1:]) / (6.0 * self.dx)  # coupling of nodes i, i+1
        return tridiag(-w, np.zeros(self.N), w).tocsr()

    def convection(self, Y: np.ndarray) -> np.ndarray:
        """``A_skew(y) y`` for one state or each column of ``Y``."""
        Y = np.asarray(Y, dtype=float)
        out = np.zeros_like(Y)
        w = (Y[:-1] + Y[1:]) / (6.0 * self.dx)
        out[:-1] += w * Y[1:]
        out[1:] -= w * Y[:-1]
        return out

    def A(self, anchor: np.ndarray) -> sp.dia_matrix:
        w = (anchor[:-1] + anchor[1:]) / (6.0 * self.dx)
        c = self._c
        return tridiag(-c - w, np.full(self.N, 2 * c), -c + w)

    def f(self, Y: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        # [A_skew(anchor) - A_skew(y)] y
        Y = np.asarray(Y, dtype=float)
        Ask = self.A_skew(anchor)
        return Ask @ Y - self.convection(Y)

    def phi(self, t: float, y: np.ndarray) -> np.ndarray:
        return -(self.A_symm @ y) - self.convection(y)

    def jacobian(self, t: float, y: np.ndarray) -> sp.csr_matrix:
        # d/dy of A_skew(y) y: row i = [(y_i + y_{i+1}) y_{i+1} - (y_i + y_{i-1}) y_{i-1}] / (6 dx)
        h = 6.0 * self.dx
        ypad = np.concatenate([[0.0], y, [0.0]])
        yl, yc, yr = ypad[:-2], ypad[1:-1], ypad[2:]
        diag = (yr - yl) / h
        upper = (yc[:-1] + 2 * yc[1:]) / h          # d/dy_{i+1} of row i
        lower = -(yc[1:] + 2 * yc[:-1]) / h         # d/dy_{i-1} of row i, stored at i-1
        c = self._c
        return tridiag(c - lower, -2 * c - diag, c - upper)

    def residual_final(self, y_next_T, y_curr_T, anchor) -> np.ndarray:
        # r_{k+1}(T) = [A_skew(anchor) - A_skew(y_{k+1}(T))] y_{k+1}(T)
        return self.A_skew(anchor) @ y_next_T - self.convection(y_next_T)


def burgers_build(N: int = 500, nu: float = 3e-4, T: float = 0.5) -> SplitOde:
    """Burgers benchmark as a split ODE with ``A_k = A_symm + A_skew(y_k(T))``."""
    prob = BurgersProblem(N, nu)
    zero = np.zeros(N)
    return SplitOde(
        name=f"burgers(N={N}, nu={nu:g})",
        v=prob.initial(),
        T=float(T),
        build_A=prob.A,
        f=prob.f,
        g=lambda t: zero,
        jacobian=prob.jacobian,
        residual_final=prob.residual_final,
        phi=prob.phi,
        g_constant=True,
        meta={"problem": prob, "omega_matrix": prob.A_symm},
    )
