"""Restriction and interpolation for reduction-based AMG.

Restriction approximates the ideal operator ``[-A_cf A_ff^{-1}, I]`` with a
truncated Neumann series for ``A_ff^{-1}``; interpolation is one-point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import StrengthGraph, strength
from .sparse import DimensionError, SingularMatrixError, as_csr, extract_submatrix, spgemm

log = logging.getLogger(__name__)

__all__ = [
    "NeumannOptions",
    "TransferPair",
    "NonUnitDiagonalError",
    "neumann_approx_inverse",
    "neumann_series",
    "build_nair_restriction",
    "build_onepoint_interp",
    "assemble_restriction",
    "assemble_interpolation",
    "transfer_from_blocks",
    "ideal_operators",
    "effective_interp",
    "blocks",
]


class NonUnitDiagonalError(ValueError):
    pass


@dataclass(frozen=True)
class NeumannOptions:
    degree: int = 1
    strength_threshold: float = 0.025

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("Neumann degree must be >= 0")
        if not 0.0 <= self.strength_threshold < 1.0:
            raise ValueError("strength threshold must lie in [0, 1)")


@dataclass
class TransferPair:
    """``R = [Z | I]`` and ``P = [W; I]`` stored with global fine-grid indexing.

    ``R`` is ``n_c x n`` and ``P`` is ``n x n_c``; ``Z`` (``n_c x n_f``) and
    ``W`` (``n_f x n_c``) are the off-identity blocks in local F/C numbering.
    """

    R: sp.csr_matrix
    P: sp.csr_matrix
    Z: sp.csr_matrix
    W: sp.csr_matrix
    Delta: sp.csr_matrix | None = None
    warnings: list = field(default_factory=list)


def blocks(A, split):
    """Return ``(A_ff, A_fc, A_cf, A_cc)``."""
    F, C = split.f_points, split.c_points
    return (
        extract_submatrix(A, F, F),
        extract_submatrix(A, F, C),
        extract_submatrix(A, C, F),
        extract_submatrix(A, C, C),
    )


def _check_unit_diagonal(M, tol=1e-14):
    d = M.diagonal()
    bad = np.flatnonzero(np.abs(d - 1.0) > tol)
    if len(bad):
        raise NonUnitDiagonalError(
            "row %d has diagonal %r; scale the matrix to unit diagonal first" % (bad[0], d[bad[0]])
        )


def neumann_series(N, degree):
    """``sum_{i=0}^{degree} N^i`` formed with repeated sparse products."""
    n = N.shape[0]
    acc = sp.identity(n, format="csr")
    term = sp.identity(n, format="csr")
    for _ in range(degree):
        term = spgemm(term, N)
        if term.nnz == 0:
            break
        acc = acc + term
    return as_csr(acc)


def neumann_approx_inverse(A_ff, opts=NeumannOptions()):
    """Truncated Neumann approximation to the inverse of a unit-diagonal ``A_ff``.

    Off-diagonal entries failing the strength test at ``opts.strength_threshold``
    are dropped before the expansion ``sum_i (I - A_ff)^i``.
    """
    A_ff = as_csr(A_ff)
    if A_ff.shape[0] != A_ff.shape[1]:
        raise DimensionError("A_ff must be square")
    _check_unit_diagonal(A_ff)
    n = A_ff.shape[0]
    if opts.degree == 0 or n == 0:
        return as_csr(sp.identity(n, format="csr"))
    S = strength(A_ff, opts.strength_threshold).S
    # keep the strong off-diagonal values of A_ff, negated
    N = as_csr(-A_ff.multiply(S))
    return neumann_series(N, opts.degree)


def assemble_restriction(Z, split):
    Z = as_csr(Z)
    if Z.shape != (split.n_c, split.n_f):
        raise DimensionError("Z must be n_c x n_f = %dx%d, got %s" % (split.n_c, split.n_f, Z.shape))
    coo = Z.tocoo()
    rows = np.concatenate([coo.row, np.arange(split.n_c)])
    cols = np.concatenate([split.f_points[coo.col], split.c_points])
    vals = np.concatenate([coo.data, np.ones(split.n_c)])
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(split.n_c, split.n)))


def assemble_interpolation(W, split):
    W = as_csr(W)
    if W.shape != (split.n_f, split.n_c):
        raise DimensionError("W must be n_f x n_c = %dx%d, got %s" % (split.n_f, split.n_c, W.shape))
    coo = W.tocoo()
    rows = np.concatenate([split.f_points[coo.row], split.c_points])
    cols = np.concatenate([coo.col, np.arange(split.n_c)])
    vals = np.concatenate([coo.data, np.ones(split.n_c)])
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(split.n, split.n_c)))


def build_nair_restriction(A, split, opts=NeumannOptions()):
    """Return ``(Z, R, Delta)`` with ``Z = -A_cf Delta`` and ``R = [Z | I]``."""
    A = as_csr(A)
    A_ff = extract_submatrix(A, split.f_points, split.f_points)
    A_cf = extract_submatrix(A, split.c_points, split.f_points)
    Delta = neumann_approx_inverse(A_ff, opts)
    Z = as_csr(-spgemm(A_cf, Delta))
    return Z, assemble_restriction(Z, split), Delta


def build_onepoint_interp(A, S, split):
    """One-point interpolation: each F-point copies its strongest C-neighbor.

    Returns ``(W, P, notes)``.  F-rows without a strong C-neighbor fall back to
    the largest C-neighbor in ``A``; rows with no C-neighbor at all stay empty
    and are listed in ``notes``.
    """
    A = as_csr(A)
    if isinstance(S, StrengthGraph):
        S = S.S
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    cols = A.indices
    cand = (split.marks[rows] == 0) & (split.marks[cols] == 1) & (rows != cols)
    r, c, mag = rows[cand], cols[cand], np.abs(A.data[cand])

    S = as_csr(S)
    s_rows = np.repeat(np.arange(n), np.diff(S.indptr))
    s_keys = s_rows * n + S.indices
    keys = r * n + c
    if len(s_keys):
        pos = np.clip(np.searchsorted(s_keys, keys), 0, len(s_keys) - 1)
        is_strong = s_keys[pos] == keys
    else:
        is_strong = np.zeros(len(keys), dtype=bool)

    # per row: strong first, then larger magnitude, then lower column
    order = np.lexsort((c, -mag, ~is_strong, r))
    r, c = r[order], c[order]
    first = np.ones(len(r), dtype=bool)
    first[1:] = r[1:] != r[:-1]
    fr, fc = r[first], c[first]

    W = as_csr(
        sp.coo_matrix(
            (np.ones(len(fr)), (split.f_index[fr], split.c_index[fc])),
            shape=(split.n_f, split.n_c),
        )
    )
    notes = []
    # decoupled rows are solved exactly by F-relaxation and need no interpolation
    coupled = np.unique(rows[rows != cols])
    empty = np.setdiff1d(np.intersect1d(split.f_points, coupled), fr)
    if len(empty):
        msg = "%d F-rows have no C-neighbor; their interpolation rows are empty" % len(empty)
        log.warning(msg)
        notes.append(msg)
    return W, assemble_interpolation(W, split), notes


def transfer_from_blocks(split, Z=None, W=None, Delta=None):
    """Build a :class:`TransferPair` from given (dense or sparse) ``Z`` and ``W`` blocks."""
    Z = as_csr(Z) if Z is not None else as_csr(sp.csr_matrix((split.n_c, split.n_f)))
    W = as_csr(W) if W is not None else as_csr(sp.csr_matrix((split.n_f, split.n_c)))
    return TransferPair(
        assemble_restriction(Z, split), assemble_interpolation(W, split), Z, W, Delta
    )


def ideal_operators(A, split):
    """Dense ideal restriction, ideal interpolation and Schur complement ``K_A``.

    ``R_ideal`` is ``n_c x n`` and ``P_ideal`` is ``n x n_c`` in global indexing.
    """
    n = A.shape[0]
    if n > 2000:
        raise ValueError("ideal_operators is a dense oracle limited to n <= 2000")
    A_ff, A_fc, A_cf, A_cc = (B.toarray() for B in blocks(as_csr(A), split))
    try:
        inv_ff = np.linalg.inv(A_ff) if split.n_f else A_ff
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("A_ff is singular") from exc
    Z = -A_cf @ inv_ff
    W = -inv_ff @ A_fc
    R = np.zeros((split.n_c, n))
    R[:, split.f_points] = Z
    R[:, split.c_points] = np.eye(split.n_c)
    P = np.zeros((n, split.n_c))
    P[split.f_points, :] = W
    P[split.c_points, :] = np.eye(split.n_c)
    K_A = A_cc - A_cf @ inv_ff @ A_fc
    return R, P, K_A


def effective_interp(W, Delta_F, A_ff, A_fc):
    """``(I - Delta_F A_ff) W - Delta_F A_fc``."""
    n_f = A_ff.shape[0]
    if not (W.shape[0] == Delta_F.shape[0] == Delta_F.shape[1] == n_f == A_fc.shape[0]):
        raise DimensionError("effective_interp: F-dimensions disagree")
    if W.shape[1] != A_fc.shape[1]:
        raise DimensionError("effective_interp: W and A_fc have different column counts")
    if all(sp.issparse(M) for M in (W, Delta_F, A_ff, A_fc)):
        return as_csr(W - Delta_F @ (A_ff @ W) - Delta_F @ A_fc)

    def dense(M):
        return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)

    W, Delta_F, A_ff, A_fc = map(dense, (W, Delta_F, A_ff, A_fc))
    return W - Delta_F @ (A_ff @ W) - Delta_F @ A_fc
