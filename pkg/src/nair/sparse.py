"""Sparse and small dense linear algebra kernels.

Every sparse operand in the package is a canonical ``scipy.sparse.csr_matrix``:
float64 values, sorted column indices, no duplicates and no stored zeros.
"""

from __future__ import annotations

import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "DimensionError",
    "SingularMatrixError",
    "PowerIterationError",
    "as_csr",
    "is_canonical",
    "index_set",
    "spmv",
    "spgemm",
    "transpose",
    "extract_submatrix",
    "diag_scale",
    "block_diag_inverse",
    "two_norm",
    "DenseLU",
    "dense_lu_solve",
    "drop_zeros",
]

DEFAULT_SEED = 20190514


class DimensionError(ValueError):
    pass


class SingularMatrixError(ArithmeticError):
    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PowerIterationError(ArithmeticError):
    """Power iteration did not reach its tolerance; ``value`` is the last estimate."""

    def __init__(self, message, value):
        super().__init__(message)
        self.value = value


def as_csr(A, shape=None):
    """Return ``A`` as a canonical float64 CSR matrix (copying when needed)."""
    if sp.issparse(A):
        A = sp.csr_matrix(A, dtype=np.float64, copy=True)
    else:
        A = np.asarray(A, dtype=np.float64)
        if A.ndim != 2:
            raise DimensionError("expected a 2-d operand, got %d-d" % A.ndim)
        A = sp.csr_matrix(A)
    if shape is not None and A.shape != tuple(shape):
        raise DimensionError("expected shape %s, got %s" % (shape, A.shape))
    A.sum_duplicates()
    A.sort_indices()
    A.eliminate_zeros()
    A.indptr = A.indptr.astype(np.int64, copy=False)
    A.indices = A.indices.astype(np.int64, copy=False)
    return A


def drop_zeros(A):
    A.eliminate_zeros()
    return A


def is_canonical(A):
    """Check the CSR invariants: monotone offsets, strictly increasing columns, no zeros."""
    if not sp.isspmatrix_csr(A):
        return False
    ptr, idx = A.indptr, A.indices
    if ptr[0] != 0 or ptr[-1] != len(idx) or len(idx) != len(A.data):
        return False
    if np.any(np.diff(ptr) < 0):
        return False
    if len(idx) and (idx.min() < 0 or idx.max() >= A.shape[1]):
        return False
    rows = np.repeat(np.arange(A.shape[0]), np.diff(ptr))
    same_row = rows[1:] == rows[:-1]
    if np.any(np.diff(idx)[same_row] <= 0):
        return False
    return not np.any(A.data == 0)


def index_set(indices, parent_dim):
    """Validate and return a sorted, duplicate-free int64 index array."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if len(idx) and (np.any(np.diff(idx) <= 0)):
        raise ValueError("index set must be strictly increasing")
    if len(idx) and (idx[0] < 0 or idx[-1] >= parent_dim):
        raise IndexError("index set entries must lie in [0, %d)" % parent_dim)
    return idx


def spmv(A, x):
    """Return ``A @ x``; each row is summed left to right, so results are deterministic."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != A.shape[1]:
        raise DimensionError("spmv: A is %dx%d but len(x) = %d" % (A.shape + (x.shape[0],)))
    return A @ x


def spgemm(A, B):
    """Exact sparse product with numerically zero entries dropped."""
    if A.shape[1] != B.shape[0]:
        raise DimensionError("spgemm: inner dimensions %d and %d differ" % (A.shape[1], B.shape[0]))
    C = sp.csr_matrix(A @ B)
    return as_csr(C)


def transpose(A):
    return as_csr(A.T)


def extract_submatrix(A, rows, cols):
    """Submatrix ``A[rows, cols]`` in the local ordering of the two index sets."""
    rows = index_set(rows, A.shape[0])
    cols = index_set(cols, A.shape[1])
    return as_csr(A[rows, :][:, cols])


def diag_scale(A):
    """Scale rows so the diagonal is one.

    Returns ``(D^{-1} A, d)`` where ``d`` is the original diagonal.  A zero or
    missing diagonal entry raises :class:`SingularMatrixError` naming the row.
    """
    if A.shape[0] != A.shape[1]:
        raise DimensionError("diag_scale needs a square matrix")
    d = A.diagonal()
    bad = np.flatnonzero(d == 0)
    if len(bad):
        raise SingularMatrixError("zero or missing diagonal entry in row %d" % bad[0], index=int(bad[0]))
    S = sp.csr_matrix(sp.diags(1.0 / d) @ A)
    S = as_csr(S)
    # exact ones on the diagonal, not d_i * (1/d_i)
    S.setdiag(1.0)
    return as_csr(S), d.copy()


def block_diag_inverse(A, block_size):
    """Sparse block-diagonal matrix holding the inverses of the ``b x b`` diagonal blocks."""
    n = A.shape[0]
    b = int(block_size)
    if b < 1 or n % b:
        raise DimensionError("block size %d does not divide n = %d" % (b, n))
    nb = n // b
    blocks = np.zeros((nb, b, b))
    coo = A.tocoo()
    mask = (coo.row // b) == (coo.col // b)
    r, c, v = coo.row[mask], coo.col[mask], coo.data[mask]
    blocks[r // b, r % b, c % b] = v
    try:
        inv = np.linalg.inv(blocks)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("singular diagonal block") from exc
    return as_csr(sp.block_diag(list(inv), format="csr"))


def two_norm(A, mode="dense", tol=1e-8, maxiter=1000, seed=DEFAULT_SEED):
    """Spectral norm of a sparse or dense matrix.

    ``mode="dense"`` takes the largest singular value from a full SVD (capped at
    dimension 2000); ``mode="power"`` runs power iteration on ``A^T A``.
    """
    if min(A.shape) == 0:
        return 0.0
    if mode == "dense":
        if max(A.shape) > 2000:
            raise ValueError("dense two_norm is limited to dimension <= 2000")
        M = A.toarray() if sp.issparse(A) else np.asarray(A, dtype=np.float64)
        return float(np.linalg.norm(M, 2))
    if mode != "power":
        raise ValueError("unknown mode %r" % mode)
    AT = A.T
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(A.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(maxiter):
        w = AT @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = np.sqrt(nw)
        v = w / nw
        if abs(new - sigma) <= tol * new:
            return float(new)
        sigma = new
    raise PowerIterationError("power iteration did not converge in %d steps" % maxiter, float(sigma))


class DenseLU:
    """Partial-pivoting LU factorization kept for repeated coarsest-level solves."""

    def __init__(self, A):
        M = A.toarray() if sp.issparse(A) else np.array(A, dtype=np.float64)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionError("LU needs a square matrix")
        self.n = M.shape[0]
        if self.n == 0:
            self.lu, self.piv = M, np.zeros(0, dtype=np.int32)
            return
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", sla.LinAlgWarning)
            lu, piv = sla.lu_factor(M, check_finite=True)
        zero = np.flatnonzero(np.diag(lu) == 0)
        if len(zero):
            raise SingularMatrixError("exactly singular matrix (zero pivot %d)" % zero[0], index=int(zero[0]))
        self.lu, self.piv = lu, piv

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if b.shape[0] != self.n:
            raise DimensionError("rhs has length %d, expected %d" % (b.shape[0], self.n))
        if self.n == 0:
            return b.copy()
        return sla.lu_solve((self.lu, self.piv), b)


def dense_lu_solve(A, b):
    return DenseLU(A).solve(b)
