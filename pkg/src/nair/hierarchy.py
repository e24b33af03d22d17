"""Multilevel setup for nAIR: scaling, splitting, transfer operators and Galerkin products."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import CfSplitting, StrengthGraph, rs_split, strength
from .sparse import (
    DenseLU,
    SingularMatrixError,
    as_csr,
    block_diag_inverse,
    diag_scale,
    spgemm,
)
from .transfer import (
    NeumannOptions,
    TransferPair,
    blocks,
    build_nair_restriction,
    build_onepoint_interp,
)

log = logging.getLogger(__name__)

__all__ = ["SolverOptions", "Level", "CoarseLevel", "Hierarchy", "setup", "filter_matrix", "complexity"]


@dataclass(frozen=True)
class SolverOptions:
    """Setup and cycle parameters; the defaults are the standard nAIR configuration."""

    neumann_degree: int = 1
    restrict_strength: float = 0.025
    split_strength: float = 0.25
    filter_tol: float = 1e-3
    max_coarse: int = 40
    max_levels: int = 30
    f_relax_sweeps: int | None = None
    cycle: str = "V"
    enable_c_relax: bool = False
    c_relax_sweeps: int = 1
    block_size: int = 1

    def __post_init__(self):
        if self.neumann_degree < 0:
            raise ValueError("neumann_degree must be >= 0")
        for name in ("restrict_strength", "split_strength", "filter_tol"):
            if getattr(self, name) < 0:
                raise ValueError("%s must be >= 0" % name)
        if self.max_coarse < 1:
            raise ValueError("max_coarse must be >= 1")
        if self.max_levels < 1:
            raise ValueError("max_levels must be >= 1")
        if self.cycle.upper() not in ("V", "F"):
            raise ValueError("cycle must be 'V' or 'F'")
        if self.f_relax_sweeps is not None and self.f_relax_sweeps < 0:
            raise ValueError("f_relax_sweeps must be >= 0")

    @property
    def sweeps(self):
        return self.neumann_degree + 1 if self.f_relax_sweeps is None else self.f_relax_sweeps


@dataclass
class Level:
    A: sp.csr_matrix
    A_scaled: sp.csr_matrix
    diag: np.ndarray
    S: StrengthGraph
    split: CfSplitting
    transfer: TransferPair
    A_ff: sp.csr_matrix
    A_fc: sp.csr_matrix
    A_cf: sp.csr_matrix
    A_cc: sp.csr_matrix
    K: sp.csr_matrix
    K_filtered: sp.csr_matrix

    @property
    def n(self):
        return self.A.shape[0]


@dataclass
class CoarseLevel:
    A: sp.csr_matrix
    A_scaled: sp.csr_matrix
    diag: np.ndarray
    lu: DenseLU

    @property
    def n(self):
        return self.A.shape[0]


@dataclass
class Hierarchy:
    levels: list
    coarsest: CoarseLevel
    options: SolverOptions
    A_input: sp.csr_matrix
    block_inverse: sp.csr_matrix | None = None
    notes: list = field(default_factory=list)
    setup_seconds: float = 0.0

    @property
    def num_levels(self):
        return len(self.levels) + 1

    def diag(self, level):
        return self.levels[level].diag if level < len(self.levels) else self.coarsest.diag

    def operator(self, level):
        """Unscaled operator on ``level`` (the filtered coarse operator below the top)."""
        return self.levels[level].A if level < len(self.levels) else self.coarsest.A

    def scaled_operator(self, level):
        return self.levels[level].A_scaled if level < len(self.levels) else self.coarsest.A_scaled

    def scale_rhs(self, b):
        """Map a right-hand side of the input system into the finest scaled space."""
        b = np.asarray(b, dtype=np.float64)
        if self.block_inverse is not None:
            b = self.block_inverse @ b
        d = self.diag(0)
        return b / d if b.ndim == 1 else b / d[:, None]

    def summary(self):
        rows = []
        for i in range(self.num_levels):
            A = self.operator(i)
            rows.append({"level": i, "n": A.shape[0], "nnz": int(A.nnz)})
        return rows


def filter_matrix(A, tol):
    """Drop off-diagonal ``a_ij`` with ``|a_ij| <= tol * |a_ii|``; kept values are unchanged."""
    A = as_csr(A)
    n = A.shape[0]
    d = A.diagonal()
    rows = np.repeat(np.arange(n), np.diff(A.indptr))
    is_diag = A.indices == rows
    have = np.zeros(n, dtype=bool)
    have[rows[is_diag]] = True
    if not np.all(have):
        raise SingularMatrixError(
            "filter: row %d has no diagonal entry" % np.flatnonzero(~have)[0],
            index=int(np.flatnonzero(~have)[0]),
        )
    keep = is_diag | (np.abs(A.data) > tol * np.abs(d[rows]))
    B = sp.csr_matrix((A.data[keep], A.indices[keep], np.concatenate([[0], np.cumsum(np.bincount(rows[keep], minlength=n))])), shape=A.shape)
    return as_csr(B)


def setup(A, options=None, **overrides):
    """Build an nAIR hierarchy for ``A``.

    Each level is scaled to unit diagonal, split with classical strength and
    Ruge-Stuben coloring, and coarsened with nAIR restriction and one-point
    interpolation.  Coarse operators ``R A P`` are filtered before recursion.
    The recursion stops at ``max_coarse`` unknowns, ``max_levels`` levels or
    when the splitting stalls; the last operator is factorized densely.
    """
    opts = options or SolverOptions()
    if overrides:
        opts = SolverOptions(**{**opts.__dict__, **overrides})
    t0 = time.perf_counter()
    A = as_csr(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError("setup needs a square matrix, got %s" % (A.shape,))

    block_inv = None
    current = A
    if opts.block_size > 1:
        block_inv = block_diag_inverse(A, opts.block_size)
        current = spgemm(block_inv, A)

    nopts = NeumannOptions(opts.neumann_degree, opts.restrict_strength)
    levels = []
    notes = []
    while True:
        n = current.shape[0]
        A_s, d = diag_scale(current)
        if n <= opts.max_coarse or len(levels) + 1 >= opts.max_levels:
            break
        S = strength(A_s, opts.split_strength)
        split = rs_split(S)
        if split.n_c == 0:
            notes.append("level %d: no C-points selected; solving directly (n=%d)" % (len(levels), n))
            break
        if split.n_c == n:
            msg = "level %d: coarsening stalled (n_c = n = %d); solving directly" % (len(levels), n)
            log.warning(msg)
            notes.append(msg)
            break
        Z, R, Delta = build_nair_restriction(A_s, split, nopts)
        W, P, interp_notes = build_onepoint_interp(A_s, S, split)
        notes.extend("level %d: %s" % (len(levels), m) for m in interp_notes)
        transfer = TransferPair(R, P, Z, W, Delta, interp_notes)
        K = spgemm(spgemm(R, A_s), P)
        K_f = filter_matrix(K, opts.filter_tol) if opts.filter_tol > 0 else K
        A_ff, A_fc, A_cf, A_cc = blocks(A_s, split)
        levels.append(Level(current, A_s, d, S, split, transfer, A_ff, A_fc, A_cf, A_cc, K, K_f))
        current = K_f

    coarsest = CoarseLevel(current, A_s, d, DenseLU(A_s))
    h = Hierarchy(levels, coarsest, opts, A, block_inv, notes)
    h.setup_seconds = time.perf_counter() - t0
    return h


def _level_work(h, lvl):
    """Work units (in nnz) for one visit of a non-coarsest level."""
    L = h.levels[lvl]
    opts = h.options
    w = opts.sweeps * (L.A_ff.nnz + L.A_fc.nnz)
    w += L.A.nnz + L.transfer.R.nnz + L.transfer.P.nnz
    if opts.enable_c_relax:
        w += opts.c_relax_sweeps * (L.A_cf.nnz + L.A_cc.nnz)
    return w


def complexity(h, cycle=None):
    """Return ``(OC, CC)`` in work units of one finest-level matvec.

    A coarsest-level solve is charged the nnz of the coarsest operator.
    """
    nnz0 = h.operator(0).nnz
    if nnz0 == 0:
        return 1.0, 1.0
    oc = sum(h.operator(i).nnz for i in range(h.num_levels)) / nnz0
    cycle = (cycle or h.options.cycle).upper()
    nl = len(h.levels)
    coarse = h.coarsest.A.nnz

    v = [0.0] * (nl + 1)
    v[nl] = coarse
    for lvl in range(nl - 1, -1, -1):
        v[lvl] = _level_work(h, lvl) + v[lvl + 1]
    if cycle == "V":
        total = v[0]
    else:
        f = [0.0] * (nl + 1)
        f[nl] = coarse
        for lvl in range(nl - 1, -1, -1):
            below = coarse if lvl + 1 == nl else f[lvl + 1] + v[lvl + 1]
            f[lvl] = _level_work(h, lvl) + below
        total = f[0]
    return float(oc), float(total / nnz0)
