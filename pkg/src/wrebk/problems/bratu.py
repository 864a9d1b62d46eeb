"""3D Liouville-Bratu-Gelfand problem with a moving Gaussian source.

``u_t = 1e4 u_xx + 1e2 u_yy + u_zz + C exp(u) + g_src`` on the unit cube,
zero Dirichlet data, second-order finite differences on ``n^3`` interior
nodes.  Node ``(i, j, k)`` has linear index ``i + n j + n^2 k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..wr import SplitOde

__all__ = ["BratuProblem", "bratu_build", "laplacian_1d"]

DIFFUSION = (1e4, 1e2, 1.0)
REACTION = 3e4
SOURCE_SWITCH = 5e-5


def laplacian_1d(n: int, h: float) -> sp.csr_matrix:
    """``-d^2/dx^2`` with zero Dirichlet ends: ``tridiag(-1, 2, -1) / h^2``."""
    return sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr") / h**2


@dataclass
class BratuProblem:
    n: int
    C: float = REACTION
    diffusion: tuple[float, float, float] = DIFFUSION

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("Bratu grid needs n >= 4 per axis")
        n = self.n
        self.h = 1.0 / (n + 1)
        self.nodes = self.h * np.arange(1, n + 1)
        L = laplacian_1d(n, self.h)
        I = sp.identity(n, format="csr")
        dx, dy, dz = self.diffusion
        self.A = (dx * sp.kron(I, sp.kron(I, L)) + dy * sp.kron(I, sp.kron(L, I))
                  + dz * sp.kron(L, sp.kron(I, I))).tocsr()
        z, y, x = np.meshgrid(self.nodes, self.nodes, self.nodes, indexing="ij")
        self.X, self.Y, self.Z = x.ravel(), y.ravel(), z.ravel()
        self.u0 = self._gaussian(0.2, 0.4, 0.5)

    @property
    def N(self) -> int:
        return self.n**3

    def _gaussian(self, x0: float, y0: float, z0: float) -> np.ndarray:
        return np.exp(-100.0 * ((self.X - x0) ** 2 + (self.Y - y0) ** 2 + (self.Z - z0) ** 2))

    def source(self, t: float) -> np.ndarray:
        x0 = 0.5 + 0.3 * np.cos(2000.0 * np.pi * t)
        y0 = 0.5 + 0.3 * np.sin(2000.0 * np.pi * t)
        g = self._gaussian(x0, y0, 0.5)
        if t <= SOURCE_SWITCH:
            g = g + self.C * self.u0
        return g

    def fhat(self, Y: np.ndarray) -> np.ndarray:
        return self.C * np.exp(Y)

    def J_diag(self, y: np.ndarray) -> np.ndarray:
        """Diagonal of the Jacobian of ``fhat``."""
        return self.C * np.exp(y)

    def A_k(self, anchor: np.ndarray) -> sp.csr_matrix:
        return (self.A - sp.diags(self.J_diag(anchor))).tocsr()

    def f(self, Y: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        Y = np.asarray(Y, dtype=float)
        d = self.J_diag(anchor)
        return self.fhat(Y) - (d[:, None] * Y if Y.ndim == 2 else d * Y)

    def phi(self, t: float, y: np.ndarray) -> np.ndarray:
        return -(self.A @ y) + self.fhat(y) + self.source(t)

    def jacobian(self, t: float, y: np.ndarray) -> sp.csr_matrix:
        return (sp.diags(self.J_diag(y)) - self.A).tocsr()

    def residual_final(self, y_next_T, y_curr_T, anchor) -> np.ndarray:
        # fhat(y_{k+1}) - fhat(y_k) - J(anchor) (y_{k+1} - y_k)
        return self.fhat(y_next_T) - self.fhat(y_curr_T) - self.J_diag(anchor) * (y_next_T - y_curr_T)

    def grid(self, y: np.ndarray) -> np.ndarray:
        """State vector as an ``(n_z, n_y, n_x)`` array."""
        return np.asarray(y).reshape(self.n, self.n, self.n)


def bratu_build(n: int = 20, T: float = 5e-5) -> SplitOde:
    """Bratu benchmark as a split ODE with ``A_k = A - J(y_k(T))``."""
    prob = BratuProblem(n)
    return SplitOde(
        name=f"bratu(n={n})",
        v=prob.u0.copy(),
        T=float(T),
        build_A=prob.A_k,
        f=prob.f,
        g=prob.source,
        jacobian=prob.jacobian,
        residual_final=prob.residual_final,
        phi=prob.phi,
        meta={"problem": prob, "stiffness_matrix": prob.A_k},
    )
