import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
import sympy

from wrebk.ros2 import (GAMMA_L_STABLE, Ros2Config, reference_solution, relative_error, ros2_integrate,
                        ros2_stability)

from conftest import lap1d


def test_stability_function_symbolic():
    # apply the two stages to y' = lam y symbolically and compare with R(z)
    lam, tau, y, g = sympy.symbols("lam tau y gamma")
    k1 = lam * y / (1 - g * tau * lam)
    k2 = (lam * (y + tau * k1) - 2 * k1) / (1 - g * tau * lam)
    y1 = y + sympy.Rational(3, 2) * tau * k1 + sympy.Rational(1, 2) * tau * k2
    z = sympy.symbols("z")
    ratio = sympy.simplify((y1 / y).subs(lam, z / tau))
    R = (1 + (1 - 2 * g) * z + (g**2 - 2 * g + sympy.Rational(1, 2)) * z**2) / (1 - g * z) ** 2
    assert sympy.simplify(ratio - R) == 0
    # second-order consistency for any gamma
    series = sympy.series(R, z, 0, 3).removeO()
    assert sympy.simplify(series - (1 + z + z**2 / 2)) == 0


@pytest.mark.parametrize("z", [-0.1, -1.0, -30.0, -1e4, complex(-1.0, 5.0), complex(0.0, 3.0)])
def test_stability_bounded_in_left_half_plane(z):
    assert abs(ros2_stability(z)) <= 1.0 + 1e-14


def test_l_stable_limit():
    assert abs(ros2_stability(-1e12)) < 1e-6


def test_scalar_step_ratio():
    lam, T = -3.0, 0.2
    res = ros2_integrate(lambda t, y: lam * y, lambda t, y: sp.csr_matrix([[lam]]), np.array([1.0]), T, 1)
    assert res.y[0] == pytest.approx(ros2_stability(lam * T), rel=1e-14)


def _heat1d(n=40):
    A = lap1d(n) * 1e-2
    Ad = A.toarray()
    x = np.arange(1, n + 1) / (n + 1)
    v = np.sin(np.pi * x) + 0.3 * np.sin(3 * np.pi * x)
    return A, Ad, v


def test_work_accounting():
    A, Ad, v = _heat1d()
    res = ros2_integrate(lambda t, y: -(A @ y), lambda t, y: -A, v, 1.0, 25)
    assert (res.steps, res.work.lu, res.work.lu_applications, res.work.fevals) == (25, 25, 50, 50)


def test_order_two_on_linear_problem():
    A, Ad, v = _heat1d()
    exact = sla.expm(-Ad) @ v
    errs = [relative_error(ros2_integrate(lambda t, y: -(A @ y), lambda t, y: -A, v, 1.0, s).y, exact)
            for s in (20, 40, 80, 160)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all((orders > 1.9) & (orders < 2.1))


def test_order_two_nonautonomous():
    # y' = -y + cos(t), y(0) = 0: y = (sin t + cos t - e^{-t})/2
    rhs = lambda t, y: -y + np.cos(t)
    jac = lambda t, y: sp.csr_matrix([[-1.0]])
    exact = (np.sin(2.0) + np.cos(2.0) - np.exp(-2.0)) / 2
    errs = [abs(ros2_integrate(rhs, jac, np.array([0.0]), 2.0, s).y[0] - exact) for s in (20, 40, 80)]
    assert 1.8 < np.log2(errs[0] / errs[1]) < 2.2
    assert 1.8 < np.log2(errs[1] / errs[2]) < 2.2


def test_reference_matches_closed_form():
    A, Ad, v = _heat1d()
    exact = sla.expm(-Ad) @ v
    ref = reference_solution(lambda t, y: -(A @ y), lambda t, y: -A, v, 1.0, target_accuracy=1e-7,
                             start_steps=16)
    assert relative_error(ref.y, exact) <= 1e-7
    assert ref.history[-1][1] < 1e-8
    # successive differences shrink by about 4 per halving
    diffs = np.array([d for _, d in ref.history])
    np.testing.assert_allclose(diffs[:-1] / diffs[1:], 4.0, rtol=0.1)


def test_reference_errors():
    A, Ad, v = _heat1d()
    with pytest.raises(ValueError):
        reference_solution(lambda t, y: -(A @ y), lambda t, y: -A, v, 1.0, target_accuracy=1e-12)
    with pytest.raises(RuntimeError):
        reference_solution(lambda t, y: -(A @ y), lambda t, y: -A, v, 1.0, target_accuracy=1e-10,
                           start_steps=4, max_steps=16)


def test_relative_error_examples():
    y = np.array([3.0, 4.0])
    assert relative_error(y, y) == 0.0
    assert relative_error(2 * y, y) == pytest.approx(1.0)
    assert relative_error(y + np.array([5e-3, 0.0]), y) == pytest.approx(1e-3)
    with pytest.raises(ValueError):
        relative_error(y, np.zeros(2))


def test_config_validation():
    assert Ros2Config(5).gamma == GAMMA_L_STABLE
    with pytest.raises(ValueError):
        Ros2Config(0)
    with pytest.raises(ValueError):
        Ros2Config(3, gamma=-1.0)


def test_blow_up_detected():
    with pytest.raises(FloatingPointError), np.errstate(all="ignore"):
        # explicit growth with a wrong (zero) Jacobian
        ros2_integrate(lambda t, y: 1e200 * y * y, lambda t, y: sp.csr_matrix((1, 1)), np.array([1e200]), 1.0, 3)
