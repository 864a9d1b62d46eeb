import numpy as np
import pytest
import scipy.sparse as sp

from wrebk.sparse import (FactorizationError, Work, apply_factored, factorize_shifted, omega_estimate,
                          one_norm, spmv, tridiag, write_matrix_market)

from conftest import lap1d


def test_tridiag_layout():
    M = tridiag(np.array([1.0, 2.0]), np.array([3.0, 4.0, 5.0]), np.array([6.0, 7.0])).toarray()
    np.testing.assert_array_equal(M, [[3, 6, 0], [1, 4, 7], [0, 2, 5]])


def test_spmv_counts_columns(rng):
    A = sp.random(20, 20, density=0.2, random_state=1, format="csr")
    w = Work()
    x = rng.standard_normal((20, 3))
    np.testing.assert_allclose(spmv(A, x, w), A @ x)
    spmv(A, x[:, 0], w)
    assert w.matvecs == 4
    with pytest.raises(ValueError):
        spmv(A, np.ones(5))


@pytest.mark.parametrize("kind", ["tridiagonal", "general"])
@pytest.mark.parametrize("sign", [1, -1])
def test_factorize_and_solve(rng, kind, sign):
    n = 30
    if kind == "tridiagonal":
        A = lap1d(n) + tridiag(rng.standard_normal(n - 1), np.zeros(n), rng.standard_normal(n - 1))
    else:
        A = sp.kron(sp.identity(5), lap1d(6)) + sp.kron(lap1d(5), sp.identity(6))
        A = A + sp.random(30, 30, density=0.05, random_state=3)
    shift = 1e-3
    w = Work()
    F = factorize_shifted(A, shift, work=w, sign=sign)
    b = rng.standard_normal((A.shape[0], 2))
    x = apply_factored(F, b)
    M = np.eye(A.shape[0]) + sign * shift * A.toarray()
    np.testing.assert_allclose(M @ x, b, atol=1e-10)
    assert (w.lu, w.lu_applications) == (1, 2)
    F.solve(b[:, 0])
    assert w.lu_applications == 3


def test_factorize_dense_input(rng):
    A = rng.standard_normal((6, 6))
    F = factorize_shifted(A, 0.1)
    b = rng.standard_normal(6)
    np.testing.assert_allclose((np.eye(6) + 0.1 * A) @ F.solve(b), b, atol=1e-12)


def test_factorize_singular():
    # I + 1 * (-I) = 0
    with pytest.raises(FactorizationError):
        factorize_shifted(-sp.identity(5, format="csr"), 1.0)
    # general sparse path: I + A is strictly upper triangular
    A = (-sp.identity(9) + sp.diags(np.ones(6), 3)).tocsr()
    with pytest.raises(FactorizationError):
        factorize_shifted(A, 1.0)


def test_factorize_input_checks():
    with pytest.raises(ValueError):
        factorize_shifted(sp.identity(3), 0.0)
    with pytest.raises(ValueError):
        factorize_shifted(sp.csr_matrix(np.ones((2, 3))), 1.0)
    F = factorize_shifted(sp.identity(3), 1.0)
    with pytest.raises(ValueError):
        F.solve(np.ones(4))


def test_one_norm():
    A = sp.csr_matrix(np.array([[1.0, -2.0], [3.0, 0.5]]))
    assert one_norm(A) == 4.0
    assert one_norm(A.toarray()) == 4.0
    assert one_norm(sp.csr_matrix((3, 3))) == 0.0


def test_omega_estimate_1d_laplacian():
    # smallest eigenvalue of tridiag(-1,2,-1)/h^2 is 4/h^2 sin^2(pi h/2)
    n = 200
    h = 1.0 / (n + 1)
    exact = 4 / h**2 * np.sin(np.pi * h / 2) ** 2
    assert omega_estimate(lap1d(n)) == pytest.approx(exact, rel=1e-4)


def test_work_add_and_copy():
    a = Work(1, 2, 3, 4)
    b = a.copy()
    b.add(Work(1, 1, 1, 1))
    assert (a.lu, b.lu, b.fevals) == (1, 2, 5)


def test_matrix_market_roundtrip(tmp_path):
    import scipy.io
    A = lap1d(5)
    write_matrix_market(tmp_path / "a.mtx", A, comment="test")
    B = scipy.io.mmread(str(tmp_path / "a.mtx"))
    np.testing.assert_allclose(B.toarray(), A.toarray())
