"""3D nonlinear heat conduction with conductivity proportional to ``u``.

``u_t = (k_x(u) u_x)_x + (k_y(u) u_y)_y + (k_z(u) u_z)_z`` with
``k_x = u/300`` and ``k_y = k_z = k_x/10``.  The x direction is periodic.
In y the walls hold Dirichlet data (``u_lo`` at ``y=0``, ``u_hi`` at
``y=1``); the z ends are insulated, on a cell-centred grid.

Face conductivities use the arithmetic mean of the two node values, so
the flux through a face of weight ``w`` between nodes ``a`` and ``b`` is
``w (u_a + u_b)(u_b - u_a) = w (u_b^2 - u_a^2)``.  The semi-discrete
system is therefore ``y' = -S (y*y) + g`` with a constant symmetric
weighted graph Laplacian ``S`` (plus boundary diagonal), and
``A(y)`` is the symmetric matrix with ``A(y) y = S (y*y)``.
Node ``(i, j, k)`` has linear index ``i + n_x j + n_x n_y k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..wr import SplitOde

__all__ = ["HeatProblem", "heat_build", "conductivity"]


def conductivity(u, axis: str = "x"):
    """``k_x(u) = u/300``; ``k_y = k_z = k_x/10``."""
    k = np.asarray(u, dtype=float) / 300.0
    return k if axis == "x" else k / 10.0


@dataclass
class HeatProblem:
    n_x: int
    n_y: int
    n_z: int
    u_lo: float = 900.0
    u_hi: float = 300.0
    amplitude: float = 1800.0
    background: float = 0.0

    def __post_init__(self):
        if min(self.n_x, self.n_y, self.n_z) < 4:
            raise ValueError("heat grid needs at least 4 nodes per axis")
        nx, ny, nz = self.n_x, self.n_y, self.n_z
        self.h_x = 1.0 / (nx + 1)
        self.h_y = 1.0 / (ny + 1)
        self.h_z = 1.0 / nz
        idx = np.arange(nx * ny * nz).reshape(nz, ny, nx)

        # k(u_face) = (u_a + u_b) / 2 / 300 (x) and a tenth of that (y, z)
        wx = 1.0 / (600.0 * self.h_x**2)
        wy = 1.0 / (6000.0 * self.h_y**2)
        wz = 1.0 / (6000.0 * self.h_z**2)
        faces_a, faces_b, weights = [], [], []

        def add(a, b, w):
            faces_a.append(a.ravel())
            faces_b.append(b.ravel())
            weights.append(np.full(a.size, w))

        add(idx, np.roll(idx, -1, axis=2), wx)              # periodic in x
        add(idx[:, :-1, :], idx[:, 1:, :], wy)
        add(idx[:-1, :, :], idx[1:, :, :], wz)              # no flux through z ends
        self.fa = np.concatenate(faces_a)
        self.fb = np.concatenate(faces_b)
        self.fw = np.concatenate(weights)

        N = nx * ny * nz
        lo, hi = idx[:, 0, :].ravel(), idx[:, -1, :].ravel()
        self.bdiag = np.zeros(N)
        self.bdiag[lo] += wy
        self.bdiag[hi] += wy
        self.g = np.zeros(N)
        self.g[lo] += wy * self.u_lo**2
        self.g[hi] += wy * self.u_hi**2

        rows = np.concatenate([self.fa, self.fb, self.fa, self.fb])
        cols = np.concatenate([self.fb, self.fa, self.fa, self.fb])
        vals = np.concatenate([-self.fw, -self.fw, self.fw, self.fw])
        self.S = (sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr() + sp.diags(self.bdiag)).tocsr()

        x = self.h_x * np.arange(1, nx + 1)
        y = self.h_y * np.arange(1, ny + 1)
        z = self.h_z * (np.arange(1, nz + 1) - 0.5)
        Z, Y, X = np.meshgrid(z, y, x, indexing="ij")
        self.coords = (X.ravel(), Y.ravel(), Z.ravel())

    @property
    def N(self) -> int:
        return self.n_x * self.n_y * self.n_z

    def initial(self) -> np.ndarray:
        X, Y, Z = self.coords
        return self.background + self.amplitude * np.exp(-60.0 * ((X - 0.5) ** 2 + (Y - 0.5) ** 2 + (Z - 0.5) ** 2))

    def A(self, y: np.ndarray) -> sp.csr_matrix:
        y = np.asarray(y, dtype=float)
        c = self.fw * (y[self.fa] + y[self.fb])
        diag = np.bincount(self.fa, c, self.N) + np.bincount(self.fb, c, self.N) + self.bdiag * y
        rows = np.concatenate([self.fa, self.fb, np.arange(self.N)])
        cols = np.concatenate([self.fb, self.fa, np.arange(self.N)])
        vals = np.concatenate([-c, -c, diag])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.N, self.N))

    def f(self, Y: np.ndarray, anchor: np.ndarray) -> np.ndarray:
        # A(anchor) y - A(y) y
        Y = np.asarray(Y, dtype=float)
        return self.A(anchor) @ Y - self.S @ (Y * Y)

    def phi(self, t: float, y: np.ndarray) -> np.ndarray:
        return self.g - self.S @ (y * y)

    def jacobian(self, t: float, y: np.ndarray) -> sp.csr_matrix:
        return (-(self.S @ sp.diags(2.0 * y))).tocsr()

    def residual_final(self, y_next_T, y_curr_T, anchor) -> np.ndarray:
        return self.A(anchor) @ (y_next_T - y_curr_T) - self.S @ (y_next_T**2 - y_curr_T**2)

    def grid(self, y: np.ndarray) -> np.ndarray:
        """State vector as an ``(n_z, n_y, n_x)`` array."""
        return np.asarray(y).reshape(self.n_z, self.n_y, self.n_x)


def heat_build(n_x: int = 20, n_y: int = 20, n_z: int = 20, T: float = 0.005,
               u_lo: float = 900.0, u_hi: float = 300.0, amplitude: float = 1800.0,
               background: float = 0.0) -> SplitOde:
    """Heat benchmark as a split ODE with ``A_k = A(y_k(T))`` and constant ``g``.

    The initial field is ``background + amplitude * Gaussian``.
    """
    prob = HeatProblem(n_x, n_y, n_z, u_lo, u_hi, amplitude, background)
    g = prob.g
    return SplitOde(
        name=f"heat({n_x}x{n_y}x{n_z})",
        v=prob.initial(),
        T=float(T),
        build_A=prob.A,
        f=prob.f,
        g=lambda t: g,
        jacobian=prob.jacobian,
        residual_final=prob.residual_final,
        phi=prob.phi,
        g_constant=True,
        meta={"problem": prob, "stiffness_matrix": prob.A},
    )
