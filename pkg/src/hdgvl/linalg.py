"""Symmetric sparse storage, banded Cholesky and Jacobi-preconditioned CG."""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

from .errors import ConvergenceError, NotSPDError, ParameterError


class SymmetricSparse:
    """Symmetric matrix stored as its lower triangle in CSC format."""

    def __init__(self, lower):
        lower = sp.csc_matrix(lower, dtype=float)
        if lower.shape[0] != lower.shape[1]:
            raise ParameterError(f"matrix must be square, got {lower.shape}")
        lower.sum_duplicates()
        if sp.triu(lower, k=1).nnz:
            raise ParameterError("SymmetricSparse accepts lower-triangle entries only")
        if lower.nnz and not np.all(np.isfinite(lower.data)):
            raise ParameterError("matrix has non-finite entries")
        lower.sort_indices()
        self.lower = lower

    @classmethod
    def from_matrix(cls, A):
        """Take the lower triangle of a full symmetric matrix (dense or sparse)."""
        return cls(sp.tril(sp.csc_matrix(A), format="csc"))

    @property
    def n(self):
        return self.lower.shape[0]

    @property
    def shape(self):
        return self.lower.shape

    def diagonal(self):
        return self.lower.diagonal()

    def to_csr(self):
        """Full symmetric matrix."""
        L = self.lower
        return (L + sp.tril(L, k=-1).T).tocsr()

    def to_dense(self):
        return self.to_csr().toarray()

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(A, x):
    """``A @ x`` using only the stored lower triangle."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != A.n:
        raise ParameterError(f"size mismatch: matrix {A.n}, vector {x.shape[0]}")
    L = A.lower
    y = L @ x
    y += L.T @ x
    y -= A.diagonal()[:, None] * x if x.ndim == 2 else A.diagonal() * x
    return y


class CholeskyFactor:
    """Banded Cholesky factor of a permuted SPD matrix.

    The permutation is reverse Cuthill-McKee, which keeps the band narrow
    for the skeleton matrices of structured meshes.
    """

    def __init__(self, perm, band, n):
        self.perm = perm
        self.band = band
        self.n = n

    def solve(self, b):
        return cholesky_solve(self, b)


def cholesky_factor(A):
    n = A.n
    if n == 0:
        return CholeskyFactor(np.zeros(0, dtype=int), np.zeros((1, 0)), 0)
    full = A.to_csr()
    perm = reverse_cuthill_mckee(full, symmetric_mode=True)
    P = full[perm][:, perm].tocoo()
    lo = P.row - P.col
    keep = lo >= 0
    bw = int(lo[keep].max()) if keep.any() else 0
    ab = np.zeros((bw + 1, n))
    # lower banded storage: ab[i - j, j] = P[i, j]
    ab[lo[keep], P.col[keep]] = P.data[keep]
    try:
        band = sla.cholesky_banded(ab, lower=True, check_finite=True)
    except np.linalg.LinAlgError as exc:
        raise NotSPDError(f"Cholesky factorization failed: {exc}") from exc
    return CholeskyFactor(perm, band, n)


def cholesky_solve(fact, b):
    b = np.asarray(b, dtype=float)
    if b.shape[0] != fact.n:
        raise ParameterError(f"size mismatch: factor {fact.n}, rhs {b.shape[0]}")
    if fact.n == 0:
        return b.copy()
    y = sla.cho_solve_banded((fact.band, True), b[fact.perm])
    x = np.empty_like(y)
    x[fact.perm] = y
    return x


def cg_solve(A, b, tol=1e-12, maxit=None, diag_precond=True, x0=None):
    """Preconditioned conjugate gradients on an SPD ``SymmetricSparse``.

    Stops when ``||b - A x|| <= tol * ||b||``.  Returns ``(x, iterations)``.
    """
    b = np.asarray(b, dtype=float)
    n = A.n
    if b.shape != (n,):
        raise ParameterError(f"size mismatch: matrix {n}, rhs {b.shape}")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    if maxit is None:
        maxit = max(10 * n, 100)
    if diag_precond:
        d = A.diagonal()
        if np.any(d <= 0):
            raise NotSPDError("non-positive diagonal entry; matrix is not SPD")
        minv = 1.0 / d
    else:
        minv = np.ones(n)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - spmv(A, x)
    z = minv * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r)
    it = 0
    while res > tol * bnorm:
        if it >= maxit:
            raise ConvergenceError(
                f"CG did not converge in {maxit} iterations (relative residual {res / bnorm:.3e})",
                residual=res / bnorm, iterations=it)
        Ap = spmv(A, p)
        pAp = p @ Ap
        if pAp <= 0:
            raise NotSPDError("non-positive curvature in CG; matrix is not SPD")
        step = rz / pAp
        x += step * p
        r -= step * Ap
        it += 1
        if it % 50 == 0:
            r = b - spmv(A, x)  # refresh against drift
        res = np.linalg.norm(r)
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, it
