import numpy as np
import pytest
import scipy.sparse as sp

from wrebk.problems.bratu import BratuProblem, bratu_build
from wrebk.problems.burgers import BurgersProblem, burgers_build
from wrebk.problems.heat import HeatProblem, conductivity, heat_build
from wrebk.sparse import one_norm


def _fd_jacobian(rhs, y, eps=1e-6):
    n = y.size
    J = np.zeros((n, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = eps * max(1.0, abs(y[i]))
        J[:, i] = (rhs(0.0, y + e) - rhs(0.0, y - e)) / (2 * e[i])
    return J


def _builds():
    return [burgers_build(30, 3e-4, 0.5), bratu_build(5, 5e-5), heat_build(5, 4, 4, 0.005)]


@pytest.mark.parametrize("problem", _builds(), ids=["burgers", "bratu", "heat"])
def test_splitting_consistency(problem, rng):
    # -A_k y + f_k(y) + g(t) = Phi(t, y) for any anchor and state
    scale = 300.0 if "heat" in problem.name else 1.0
    for _ in range(20):
        y = scale * (1 + 0.3 * rng.standard_normal(problem.N)) if scale > 1 else rng.standard_normal(problem.N)
        anchor = y + 0.1 * scale * rng.standard_normal(problem.N)
        t = rng.uniform(0, problem.T)
        lhs = -(problem.build_A(anchor) @ y) + problem.f(y, anchor) + problem.source(t)
        rhs = problem.rhs(t, y)
        assert np.linalg.norm(lhs - rhs) <= 1e-11 * max(np.linalg.norm(rhs), 1.0) * scale


@pytest.mark.parametrize("problem", _builds(), ids=["burgers", "bratu", "heat"])
def test_splitting_identity_at_anchor_and_vectorized_f(problem, rng):
    scale = 300.0 if "heat" in problem.name else 1.0
    Y = scale * (1 + 0.2 * rng.standard_normal((problem.N, 3)))
    anchor = Y[:, 0]
    F = problem.f(Y, anchor)
    for j in range(3):
        np.testing.assert_allclose(F[:, j], problem.f(Y[:, j], anchor), rtol=1e-12, atol=1e-9 * scale**2)


@pytest.mark.parametrize("problem", _builds(), ids=["burgers", "bratu", "heat"])
def test_closed_form_residual(problem, rng):
    scale = 300.0 if "heat" in problem.name else 1.0
    yc = scale * (1 + 0.2 * rng.standard_normal(problem.N))
    yn = yc + 0.05 * scale * rng.standard_normal(problem.N)
    anchor = yc
    generic = problem.f(yn, anchor) - problem.f(yc, anchor)
    closed = problem.residual_final(yn, yc, anchor)
    np.testing.assert_allclose(closed, generic, rtol=1e-9, atol=1e-9 * np.abs(generic).max())


@pytest.mark.parametrize("problem", _builds(), ids=["burgers", "bratu", "heat"])
def test_jacobian_against_finite_differences(problem, rng):
    scale = 300.0 if "heat" in problem.name else 1.0
    y = scale * (1 + 0.2 * rng.standard_normal(problem.N))
    J = problem.jac(0.0, y)
    J = J.toarray() if sp.issparse(J) else J
    Jfd = _fd_jacobian(problem.rhs, y)
    assert np.abs(J - Jfd).max() <= 1e-6 * np.abs(J).max()


# Burgers

def test_burgers_zero_state():
    p = burgers_build(20)
    z = np.zeros(20)
    assert np.all(p.f(z, z) == 0) and np.all(p.rhs(0.0, z) == 0)


def test_burgers_skew_and_spd(rng):
    prob = BurgersProblem(40, 3e-4)
    for _ in range(5):
        S = prob.A_skew(rng.standard_normal(40))
        assert abs(S + S.T).max() == 0
    Asym = prob.A_symm.toarray()
    np.testing.assert_array_equal(Asym, Asym.T)
    assert np.linalg.eigvalsh(Asym).min() > 0


def test_burgers_frozen_system_dissipative(rng):
    # d/dt ||y||^2 = -2 y^T A_k y <= 0 for A_k = A_symm + A_skew(anchor)
    prob = BurgersProblem(40, 3e-4)
    Ak = prob.A(rng.standard_normal(40)).toarray()
    assert np.linalg.eigvalsh((Ak + Ak.T) / 2).min() >= 0


def test_burgers_initial_value_and_errors():
    prob = BurgersProblem(9, 1e-3)
    np.testing.assert_allclose(prob.initial(), 1.5 * prob.x * (1 - prob.x) ** 2)
    assert prob.dx == pytest.approx(0.1)
    with pytest.raises(ValueError):
        BurgersProblem(2, 1e-3)
    with pytest.raises(ValueError):
        BurgersProblem(10, 0.0)


# Bratu

def test_bratu_jacobian_diagonal_at_zero():
    prob = BratuProblem(5)
    np.testing.assert_array_equal(prob.J_diag(np.zeros(prob.N)), 3e4)


def test_bratu_source_switch():
    prob = BratuProblem(6)
    g_before = prob.source(5e-5)
    g_after = prob.source(5.0000001e-5)
    np.testing.assert_allclose(g_before - g_after, prob.C * prob.u0, rtol=1e-4, atol=1e-6)
    # the moving Gaussian is on the circle of radius 0.3 around (0.5, 0.5)
    x0 = 0.5 + 0.3 * np.cos(2000 * np.pi * 1e-4)
    y0 = 0.5 + 0.3 * np.sin(2000 * np.pi * 1e-4)
    gauss = np.exp(-100 * ((prob.X - x0) ** 2 + (prob.Y - y0) ** 2 + (prob.Z - 0.5) ** 2))
    np.testing.assert_allclose(prob.source(1e-4), gauss)


def test_bratu_operator_is_anisotropic_laplacian():
    prob = BratuProblem(4)
    A = prob.A.toarray()
    h2 = prob.h**2
    np.testing.assert_allclose(np.diag(A), 2 * (1e4 + 1e2 + 1) / h2)
    # x neighbour (index + 1), y neighbour (+ n), z neighbour (+ n^2)
    assert A[0, 1] == pytest.approx(-1e4 / h2)
    assert A[0, 4] == pytest.approx(-1e2 / h2)
    assert A[0, 16] == pytest.approx(-1.0 / h2)
    np.testing.assert_allclose(A, A.T)


def test_bratu_initial_value():
    prob = BratuProblem(9)
    i = np.argmax(prob.u0)
    assert prob.X[i] == pytest.approx(0.2) and prob.Y[i] == pytest.approx(0.4) and prob.Z[i] == pytest.approx(0.5)
    assert prob.u0.max() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        BratuProblem(3)


def test_bratu_stiffness_40():
    # T ||A(y)||_1 at T = 1e-4 on 40^3, evaluated at the initial state
    p = bratu_build(40, 1e-4)
    prob = p.meta["problem"]
    val = p.T * one_norm(prob.A)
    assert val == pytest.approx(6.79e3, rel=0.1)


# Heat

def test_heat_conductivity():
    assert conductivity(300.0) == pytest.approx(1.0)
    assert conductivity(300.0, "y") == pytest.approx(0.1)
    assert conductivity(300.0, "z") == pytest.approx(0.1)


def test_heat_constant_field_is_stationary():
    p = heat_build(6, 5, 4, u_lo=300.0, u_hi=300.0, amplitude=0.0, background=300.0)
    dy = p.rhs(0.0, p.v)
    assert np.abs(dy).max() <= 1e-12 * np.abs(p.meta["problem"].g).max()


def test_heat_A_symmetric_and_anchor_identity(rng):
    p = heat_build(5, 5, 4)
    y = 300 + 50 * rng.random(p.N)
    A = p.build_A(y)
    assert abs(A - A.T).max() == 0
    assert np.abs(p.f(y, y)).max() <= 1e-9 * np.abs(A @ y).max()


def test_heat_grid_and_boundary_data():
    prob = HeatProblem(5, 6, 4)
    assert prob.h_x == pytest.approx(1 / 6) and prob.h_y == pytest.approx(1 / 7) and prob.h_z == pytest.approx(0.25)
    X, Y, Z = prob.coords
    np.testing.assert_allclose(np.unique(Z), [0.125, 0.375, 0.625, 0.875])
    # boundary data only feeds the first and last y rows
    g = prob.grid(prob.g)
    wy = 1.0 / (6000 * prob.h_y**2)
    np.testing.assert_allclose(g[:, 0, :], wy * 900.0**2)
    np.testing.assert_allclose(g[:, -1, :], wy * 300.0**2)
    assert np.all(g[:, 1:-1, :] == 0)
    np.testing.assert_allclose(prob.initial().max(), 1800 * np.exp(-60 * ((X - .5)**2 + (Y - .5)**2 + (Z - .5)**2)).max())
    with pytest.raises(ValueError):
        HeatProblem(3, 5, 5)


def test_heat_periodic_in_x():
    # a field varying only in x is coupled across the x = 0 / x = 1 seam
    prob = HeatProblem(5, 4, 4, u_lo=0.0, u_hi=0.0)
    u = np.zeros((4, 4, 5))
    u[:, :, 0] = 400.0
    u[:, :, -1] = 200.0
    A = prob.A(u.ravel())
    i0 = 0          # (x_1, y_1, z_1)
    i_last = 4      # (x_5, y_1, z_1)
    assert A[i0, i_last] != 0 and A[i0, i_last] == A[i_last, i0]
