import numpy as np
import pytest
import scipy.sparse as sp

from hdgvl.errors import ConvergenceError, NotSPDError, ParameterError
from hdgvl.linalg import SymmetricSparse, cg_solve, cholesky_factor, cholesky_solve, spmv


def _random_spd(rng, n, density=0.2):
    M = sp.random(n, n, density=density, random_state=rng).toarray()
    return M.T @ M + np.eye(n)


def test_storage_rules():
    with pytest.raises(ParameterError):
        SymmetricSparse(sp.csc_matrix(np.array([[1.0, 2.0], [0.0, 1.0]])))
    with pytest.raises(ParameterError):
        SymmetricSparse(sp.csc_matrix(np.array([[np.inf]])))
    with pytest.raises(ParameterError):
        SymmetricSparse(sp.csc_matrix(np.ones((2, 3))))


def test_spmv_matches_dense(rng):
    D = np.diag([1.0, 2.0, 3.0])
    assert np.allclose(spmv(SymmetricSparse.from_matrix(D), [1, 1, 1]), [1, 2, 3])
    Z = SymmetricSparse.from_matrix(np.zeros((4, 4)))
    assert np.all(spmv(Z, rng.standard_normal(4)) == 0)
    for _ in range(20):
        A = _random_spd(rng, 30)
        S = SymmetricSparse.from_matrix(A)
        x, y = rng.standard_normal(30), rng.standard_normal(30)
        assert np.abs(S @ x - A @ x).max() < 1e-12 * np.abs(A).max() * 30
        # symmetry: y.(A x) == x.(A y)
        assert abs(y @ spmv(S, x) - x @ spmv(S, y)) < 1e-10
    with pytest.raises(ParameterError):
        spmv(S, np.zeros(3))


def test_cholesky_examples():
    I = SymmetricSparse.from_matrix(np.eye(5))
    b = np.arange(5.0)
    assert np.allclose(cholesky_solve(cholesky_factor(I), b), b)
    A = SymmetricSparse.from_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
    x = cholesky_factor(A).solve([1.0, 2.0])
    assert np.abs(x - [1 / 11, 7 / 11]).max() < 1e-15
    with pytest.raises(NotSPDError):
        cholesky_factor(SymmetricSparse.from_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])))
    empty = cholesky_factor(SymmetricSparse.from_matrix(np.zeros((0, 0))))
    assert cholesky_solve(empty, np.zeros(0)).shape == (0,)


def test_cholesky_random(rng):
    for _ in range(10):
        A = _random_spd(rng, 60, 0.05)
        b = rng.standard_normal(60)
        x = cholesky_factor(SymmetricSparse.from_matrix(A)).solve(b)
        assert np.linalg.norm(A @ x - b) < 1e-10 * np.linalg.norm(b)


def test_cg_examples(rng):
    A = SymmetricSparse.from_matrix(np.eye(6))
    x, it = cg_solve(A, np.zeros(6))
    assert it == 0 and np.all(x == 0)
    b = rng.standard_normal(6)
    x, it = cg_solve(A, b)
    assert it == 1 and np.allclose(x, b)
    with pytest.raises(NotSPDError):
        cg_solve(SymmetricSparse.from_matrix(np.diag([1.0, -1.0])), np.ones(2))


def test_cg_random_spd(rng):
    for _ in range(100):
        n = int(rng.integers(5, 40))
        A = _random_spd(rng, n, 0.3)
        S = SymmetricSparse.from_matrix(A)
        b = rng.standard_normal(n)
        x, _ = cg_solve(S, b, tol=1e-12)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
        xc = cholesky_factor(S).solve(b)
        assert np.abs(x - xc).max() < 1e-8 * max(1, np.abs(xc).max())


def test_cg_iteration_limit(rng):
    A = _random_spd(rng, 50, 0.3)
    with pytest.raises(ConvergenceError) as info:
        cg_solve(SymmetricSparse.from_matrix(A), rng.standard_normal(50), maxit=2)
    assert info.value.iterations == 2
