import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_sparse
from nair.graph import (
    C_POINT,
    F_POINT,
    NotTriangularError,
    is_lower_triangular,
    rs_split,
    scc,
    strength,
    topological_order,
)
from nair.problems import TransportSpec, gen_chain, gen_random_triangular, gen_transport
from nair.sparse import as_csr


def test_strength_threshold_example():
    A = as_csr(np.array([[1.0, -0.5, -0.01], [0, 1, 0], [0, 0, 1]]))
    S = strength(A, 0.025).S
    assert list(S[0].indices) == [1]


def test_strength_threshold_zero_keeps_offdiagonals(rng):
    A = as_csr(random_sparse(rng, 10, 10) + sp.identity(10))
    S = strength(A, 0.0).S
    off = A.copy()
    off.setdiag(0)
    off = as_csr(off)
    assert np.array_equal(S.indptr, off.indptr) and np.array_equal(S.indices, off.indices)


def test_strength_diagonal_matrix_empty():
    assert strength(as_csr(np.diag([1.0, 2, 3])), 0.25).S.nnz == 0


def test_strength_rejects_bad_threshold():
    with pytest.raises(ValueError):
        strength(as_csr(np.eye(2)), 1.0)


def test_rs_split_diagonal_all_f():
    split = rs_split(strength(as_csr(np.eye(5)), 0.25))
    assert split.n_c == 0 and split.n_f == 5


def test_rs_split_two_mutual_points():
    A = as_csr(np.array([[1.0, -1], [-1, 1]]))
    split = rs_split(strength(A, 0.25))
    assert list(split.marks) == [C_POINT, F_POINT]


def _reference_rs(S):
    """Plain transcription of the first-pass rules, O(n^2) per step."""
    S = S.toarray() != 0
    n = len(S)
    lam = S.sum(axis=0).astype(int)
    label = [None] * n
    for i in range(n):
        if not S[i].any() and not S[:, i].any():
            label[i] = "F"
    while any(l is None for l in label):
        cand = [i for i in range(n) if label[i] is None]
        best = max(cand, key=lambda i: (lam[i], -i))
        label[best] = "C"
        for j in range(n):
            if label[j] is None and S[j, best]:
                label[j] = "F"
                for k in range(n):
                    if label[k] is None and S[j, k]:
                        lam[k] += 1
    return np.array([1 if l == "C" else 0 for l in label])


def test_rs_split_chain_matches_reference():
    A = gen_chain(8).A
    S = strength(A, 0.25).S
    split = rs_split(S)
    assert np.array_equal(split.marks, _reference_rs(S))


@given(st.integers(0, 2**31 - 1), st.integers(2, 30), st.floats(0.05, 0.6))
def test_rs_split_matches_reference_random(seed, n, density):
    A = as_csr(random_sparse(np.random.default_rng(seed), n, n, density) + sp.identity(n))
    S = strength(A, 0.25).S
    split = rs_split(S)
    assert np.array_equal(split.marks, _reference_rs(S))
    # labels partition the index set; coarse map is order preserving
    assert split.n_c + split.n_f == n
    assert np.array_equal(split.c_index[split.c_points], np.arange(split.n_c))
    assert np.array_equal(split.f_index[split.f_points], np.arange(split.n_f))


@pytest.mark.parametrize(
    "prob",
    [gen_chain(50), gen_transport(TransportSpec(2, 12)), gen_transport(TransportSpec(2, 10, velocity="b2"))],
    ids=["chain", "transport", "transport-b2"],
)
def test_every_f_point_has_strong_c_neighbor(prob):
    S = strength(prob.A, 0.25).S
    split = rs_split(S)
    for i in split.f_points:
        nbrs = S[i].indices
        if len(nbrs) == 0 and S[:, i].nnz == 0:
            continue
        assert np.any(split.marks[nbrs] == C_POINT), i


@given(st.integers(0, 2**31 - 1), st.floats(0.5, 100.0), st.booleans())
def test_strength_scale_invariant(seed, alpha, negate):
    rng = np.random.default_rng(seed)
    A = as_csr(random_sparse(rng, 15, 15, 0.3))
    alpha = -alpha if negate else alpha
    S1, S2 = strength(A, 0.25).S, strength(as_csr(alpha * A), 0.25).S
    assert np.array_equal(S1.indptr, S2.indptr) and np.array_equal(S1.indices, S2.indices)


def test_scc_examples():
    L = as_csr(np.tril(np.ones((5, 5)), -1) + np.eye(5))
    dec = scc(L)
    assert dec.is_triangular and dec.sizes == [1] * 5
    two = as_csr(np.array([[1.0, 1, 0], [1, 1, 0], [0, 1, 1]]))
    dec = scc(two)
    assert not dec.is_triangular and dec.sizes == [1, 2]


def test_scc_permuted_triangular(rng):
    A = gen_random_triangular(40, seed=7).A
    perm = rng.permutation(40)
    B = as_csr(A[perm][:, perm])
    assert scc(B).is_triangular
    order = topological_order(B)
    assert is_lower_triangular(B, order)


def test_topological_order_examples():
    L = gen_random_triangular(10, seed=3).A
    assert is_lower_triangular(L, topological_order(L))
    U = as_csr(L.T)
    assert is_lower_triangular(U, topological_order(U))
    # a dense upper-triangular pattern admits only the reversed order
    full = as_csr(np.triu(np.ones((10, 10))))
    assert np.array_equal(topological_order(full), np.arange(10)[::-1])
    with pytest.raises(NotTriangularError) as err:
        topological_order(as_csr(np.array([[1.0, 1], [1, 1]])))
    assert err.value.size == 2


@given(st.integers(0, 2**31 - 1), st.integers(2, 25))
def test_scc_sizes_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    A = as_csr(random_sparse(rng, n, n, 0.15) + sp.identity(n))
    perm = rng.permutation(n)
    B = as_csr(A[perm][:, perm])
    assert scc(A).sizes == scc(B).sizes
    dec = scc(A)
    assert sorted(np.concatenate(dec.components).tolist()) == list(range(n))


@given(st.integers(0, 2**31 - 1), st.integers(2, 25))
def test_scc_components_in_dependency_order(seed, n):
    rng = np.random.default_rng(seed)
    A = as_csr(random_sparse(rng, n, n, 0.15) + sp.identity(n))
    dec = scc(A)
    where = np.empty(n, dtype=int)
    for c, comp in enumerate(dec.components):
        where[comp] = c
    coo = A.tocoo()
    # i depends on j: j's component must be emitted no later than i's
    assert np.all(where[coo.col] <= where[coo.row])
