"""Strength of connection, classical CF-splitting and structural analysis of matrix graphs."""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr, transpose

__all__ = [
    "StrengthGraph",
    "CfSplitting",
    "SccDecomposition",
    "NotTriangularError",
    "strength",
    "rs_split",
    "splitting_from_marks",
    "scc",
    "topological_order",
    "is_lower_triangular",
]

F_POINT = 0
C_POINT = 1


class NotTriangularError(ValueError):
    def __init__(self, message, size):
        super().__init__(message)
        self.size = size


@dataclass(frozen=True)
class StrengthGraph:
    S: sp.csr_matrix
    threshold: float

    @property
    def shape(self):
        return self.S.shape


@dataclass(frozen=True)
class CfSplitting:
    """C/F labels plus the maps between global and coarse/fine local indices.

    ``c_index[i]`` is the coarse index of C-point ``i`` (-1 for F-points) and
    ``f_index`` is the analogous map for F-points.
    """

    marks: np.ndarray
    c_points: np.ndarray
    f_points: np.ndarray
    c_index: np.ndarray
    f_index: np.ndarray

    @property
    def n(self):
        return len(self.marks)

    @property
    def n_c(self):
        return len(self.c_points)

    @property
    def n_f(self):
        return len(self.f_points)

    @property
    def fc_order(self):
        """Global indices in F-then-C order (the block ordering of the theory)."""
        return np.concatenate([self.f_points, self.c_points])


def splitting_from_marks(marks):
    marks = np.asarray(marks, dtype=np.int8)
    if np.any((marks != F_POINT) & (marks != C_POINT)):
        raise ValueError("marks must be 0 (F) or 1 (C)")
    c_points = np.flatnonzero(marks == C_POINT).astype(np.int64)
    f_points = np.flatnonzero(marks == F_POINT).astype(np.int64)
    c_index = np.full(len(marks), -1, dtype=np.int64)
    f_index = np.full(len(marks), -1, dtype=np.int64)
    c_index[c_points] = np.arange(len(c_points))
    f_index[f_points] = np.arange(len(f_points))
    return CfSplitting(marks, c_points, f_points, c_index, f_index)


def strength(A, threshold):
    """Absolute-value strength of connection.

    ``j != i`` is strong for row ``i`` when ``|a_ij| >= threshold * max_{k != i} |a_ik|``.
    """
    if not 0.0 <= threshold < 1.0:
        raise ValueError("threshold must lie in [0, 1), got %r" % threshold)
    A = as_csr(A)
    n = A.shape[0]
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    off = A.indices != rows
    mag = np.abs(A.data)
    rowmax = np.zeros(n)
    np.maximum.at(rowmax, rows[off], mag[off])
    keep = off & (mag >= threshold * rowmax[rows])
    S = sp.csr_matrix(
        (np.ones(int(keep.sum())), (rows[keep], A.indices[keep])), shape=A.shape
    )
    return StrengthGraph(as_csr(S), float(threshold))


def rs_split(S):
    """First-pass Ruge-Stuben coloring of a strength graph.

    The measure of a point is the number of points that strongly depend on it.
    The unassigned point with the largest measure (lowest index on ties)
    becomes C, its unassigned strong dependents become F, and every unassigned
    point those new F-points strongly depend on gains one unit of measure.
    Points with no strong connections in either direction are F.
    """
    if isinstance(S, StrengthGraph):
        S = S.S
    n = S.shape[0]
    if S.shape[1] != n:
        raise ValueError("strength graph must be square")
    T = transpose(S)
    s_ptr, s_idx = S.indptr, S.indices
    t_ptr, t_idx = T.indptr, T.indices
    lam = np.diff(t_ptr).astype(np.int64)
    state = np.full(n, -1, dtype=np.int8)
    isolated = (np.diff(s_ptr) == 0) & (lam == 0)
    state[isolated] = F_POINT

    lam_l = lam.tolist()
    state_l = state.tolist()
    s_ptr_l, s_idx_l = s_ptr.tolist(), s_idx.tolist()
    t_ptr_l, t_idx_l = t_ptr.tolist(), t_idx.tolist()
    heap = [(-lam_l[i], i) for i in range(n) if state_l[i] < 0]
    heapq.heapify(heap)
    while heap:
        neg, i = heapq.heappop(heap)
        if state_l[i] >= 0 or -neg != lam_l[i]:
            continue
        state_l[i] = C_POINT
        for jj in range(t_ptr_l[i], t_ptr_l[i + 1]):
            j = t_idx_l[jj]
            if state_l[j] >= 0:
                continue
            state_l[j] = F_POINT
            for kk in range(s_ptr_l[j], s_ptr_l[j + 1]):
                k = s_idx_l[kk]
                if state_l[k] < 0:
                    lam_l[k] += 1
                    heapq.heappush(heap, (-lam_l[k], k))
    return splitting_from_marks(np.array(state_l, dtype=np.int8))


@dataclass(frozen=True)
class SccDecomposition:
    components: list
    is_triangular: bool

    @property
    def sizes(self):
        return sorted(len(c) for c in self.components)


def scc(A):
    """Tarjan decomposition of the graph with an edge i -> j for each off-diagonal a_ij.

    Components come out in reverse topological order of that graph, i.e. every
    component appears after all components it depends on.
    """
    A = as_csr(A)
    n = A.shape[0]
    if A.shape[1] != n:
        raise ValueError("scc needs a square matrix")
    ptr, idx = A.indptr.tolist(), A.indices.tolist()
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    components = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, ptr[root])]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            end = ptr[v + 1]
            descended = False
            while pos < end:
                w = idx[pos]
                pos += 1
                if w == v:
                    continue
                if index[w] < 0:
                    work[-1] = (v, pos)
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, ptr[w]))
                    descended = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if descended:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(np.array(sorted(comp), dtype=np.int64))
    tri = all(len(c) == 1 for c in components)
    return SccDecomposition(components, tri)


def topological_order(A):
    """Permutation ``perm`` with ``A[perm][:, perm]`` lower triangular."""
    dec = scc(A)
    if not dec.is_triangular:
        big = max(len(c) for c in dec.components)
        raise NotTriangularError(
            "matrix graph has a strongly connected component of size %d" % big, big
        )
    return np.concatenate(dec.components) if dec.components else np.zeros(0, dtype=np.int64)


def is_lower_triangular(A, perm=None):
    A = as_csr(A)
    if perm is not None:
        A = as_csr(A[perm, :][:, perm])
    coo = A.tocoo()
    return bool(np.all(coo.col <= coo.row))
