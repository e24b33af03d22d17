"""Shared builders for small two-level configurations."""

import numpy as np

from nair.graph import rs_split, splitting_from_marks, strength
from nair.hierarchy import setup
from nair.problems import gen_random_triangular
from nair.sparse import as_csr, diag_scale
from nair.transfer import NeumannOptions, build_nair_restriction, build_onepoint_interp, transfer_from_blocks


def random_split(n, rng, frac=0.5):
    marks = (rng.random(n) < frac).astype(np.int8)
    marks[rng.integers(n)] = 1
    marks[rng.integers(n)] = 0
    if marks.all() or not marks.any():
        marks[0], marks[-1] = 0, 1
    return splitting_from_marks(marks)


def nair_two_level(A, k=1, phi=0.0, theta=0.25):
    """Scaled matrix, RS splitting and nAIR transfer for one level."""
    A_s, _ = diag_scale(as_csr(A))
    S = strength(A_s, theta)
    split = rs_split(S)
    Z, R, Delta = build_nair_restriction(A_s, split, NeumannOptions(k, phi))
    W, P, _ = build_onepoint_interp(A_s, S, split)
    return A_s, split, transfer_from_blocks(split, Z, W, Delta)


def random_instance(seed, n=None, density=0.3):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(20, 100))
    return gen_random_triangular(n, density=density, decay=0.3, seed=seed)


def two_grid_hierarchy(A, **kw):
    opts = dict(max_levels=2, filter_tol=0.0, max_coarse=1)
    opts.update(kw)
    return setup(A, **opts)
