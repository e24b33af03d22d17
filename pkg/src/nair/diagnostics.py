"""Dense numerical checks of the two-grid and multilevel convergence theory.

Everything here works in the F-then-C block ordering of a splitting and
materializes operators densely, so inputs are limited to small problems.
Matrices passed in are expected to be unit-diagonal scaled, as in the
hierarchy; ``Delta_F`` is the Neumann sum induced by ``sweeps`` Jacobi
F-relaxations, ``sum_{i<sweeps} (I - A_ff)^i``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from .graph import topological_order
from .hierarchy import Hierarchy
from .solvers import cycle
from .sparse import PowerIterationError, SingularMatrixError, as_csr, two_norm
from .transfer import blocks, neumann_series

__all__ = [
    "DeltaReport",
    "GReport",
    "NilpotencyReport",
    "relaxation_delta",
    "delta_constants",
    "g_matrix",
    "two_grid_report",
    "two_grid_error",
    "verify_outer_product",
    "verify_schur_identity",
    "multilevel_g",
    "probe_cycle",
    "nilpotency_check",
    "DENSE_CAP",
]

DENSE_CAP = 2000


@dataclass
class DeltaReport:
    delta_F_norm: float
    delta_R_norm: float
    delta_P_norm: float
    delta_F_hat_norm: float
    k: int | None
    sweeps: int
    phi: float | None
    mode: str = "dense"

    def to_dict(self):
        return asdict(self)


@dataclass
class GReport:
    g_norm: float | None = None
    g_pre_norm: float | None = None
    g_hat_norm: float | None = None
    bound_rho: float | None = None
    bound_rho_pre: float | None = None
    gamma: float | None = None
    rho_tg: float | None = None
    gamma_bound: float | None = None
    condition_met: bool | None = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class NilpotencyReport:
    is_strictly_triangular_in_order: bool
    max_upper: float
    spectral_radius_estimate: float
    E_power_norm: float
    n: int

    def to_dict(self):
        return asdict(self)


def _dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M, dtype=np.float64)


def _norm(M):
    return float(np.linalg.norm(M, 2)) if M.size else 0.0


def relaxation_delta(A_ff, sweeps):
    """``sum_{i<sweeps} (I - A_ff)^i``: the approximate inverse applied by Jacobi F-relaxation."""
    A_ff = as_csr(A_ff)
    n = A_ff.shape[0]
    if sweeps <= 0:
        return as_csr(sp.csr_matrix((n, n)))
    N = as_csr(sp.identity(n, format="csr") - A_ff)
    return neumann_series(N, sweeps - 1)


class _Pieces:
    """Dense block quantities of one two-grid method."""

    def __init__(self, A, split, transfer, sweeps=None, Delta_F=None):
        A = as_csr(A)
        if A.shape[0] > DENSE_CAP:
            raise ValueError("dense diagnostics are limited to n <= %d" % DENSE_CAP)
        self.split = split
        A_ff, A_fc, A_cf, A_cc = blocks(A, split)
        self.A_ff, self.A_fc, self.A_cf, self.A_cc = map(_dense, (A_ff, A_fc, A_cf, A_cc))
        self.Z, self.W = _dense(transfer.Z), _dense(transfer.W)
        if Delta_F is None:
            Delta_F = relaxation_delta(A_ff, sweeps)
        self.D = _dense(Delta_F)
        nf, nc = split.n_f, split.n_c
        self.I_f, self.I_c = np.eye(nf), np.eye(nc)
        self.dF = self.I_f - self.D @ self.A_ff
        self.dF_hat = self.I_f - self.A_ff @ self.D
        self.dP = self.A_ff @ self.W + self.A_fc
        self.dR = self.Z @ self.A_ff + self.A_cf
        self.K = self.Z @ self.A_ff @ self.W + self.A_cf @ self.W + self.Z @ self.A_fc + self.A_cc
        self.W_hat = self.dF @ self.W - self.D @ self.A_fc

    @property
    def Kinv(self):
        if not hasattr(self, "_Kinv"):
            try:
                self._Kinv = np.linalg.inv(self.K) if self.K.size else self.K
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError("coarse operator RAP is singular") from exc
        return self._Kinv

    @property
    def A_ff_inv(self):
        if not hasattr(self, "_Affinv"):
            try:
                self._Affinv = np.linalg.inv(self.A_ff) if self.A_ff.size else self.A_ff
            except np.linalg.LinAlgError as exc:
                raise SingularMatrixError("A_ff is singular") from exc
        return self._Affinv

    def A_block(self):
        return np.block([[self.A_ff, self.A_fc], [self.A_cf, self.A_cc]])

    def G(self):
        return self.dF + self.D @ self.dP @ self.Kinv @ self.dR

    def G_pre(self):
        return self.dF_hat + self.dP @ self.Kinv @ self.dR @ self.D


def delta_constants(A, split, transfer, sweeps, k=None, phi=None, Delta_F=None, mode="auto"):
    """Spectral norms of ``delta_F``, ``delta_R``, ``delta_P`` and ``delta_F_hat``.

    Dense SVD norms are used up to ``DENSE_CAP`` unknowns, power iteration beyond.
    """
    A = as_csr(A)
    if mode == "auto":
        mode = "dense" if A.shape[0] <= DENSE_CAP else "power"
    if mode == "dense":
        p = _Pieces(A, split, transfer, sweeps, Delta_F)
        return DeltaReport(_norm(p.dF), _norm(p.dR), _norm(p.dP), _norm(p.dF_hat), k, sweeps, phi, "dense")
    A_ff, A_fc, A_cf, _ = blocks(A, split)
    D = relaxation_delta(A_ff, sweeps) if Delta_F is None else as_csr(Delta_F)
    I_f = sp.identity(split.n_f, format="csr")
    Z, W = as_csr(transfer.Z), as_csr(transfer.W)
    mats = (I_f - D @ A_ff, Z @ A_ff + A_cf, A_ff @ W + A_fc, I_f - A_ff @ D)
    norms, mode = [], "power"
    for M in mats:
        try:
            norms.append(two_norm(as_csr(M), mode="power"))
        except PowerIterationError as exc:
            # clustered top singular values: keep the last (lower) estimate
            norms.append(exc.value)
            mode = "power-unconverged"
    return DeltaReport(*norms, k, sweeps, phi, mode)


def g_matrix(A, split, transfer, sweeps, mode="post", Delta_F=None):
    """Dense ``G`` (post-relaxation) or ``G_pre`` (pre-relaxation) and its 2-norm."""
    p = _Pieces(A, split, transfer, sweeps, Delta_F)
    if mode == "post":
        G = p.G()
    elif mode == "pre":
        G = p.G_pre()
    else:
        raise ValueError("mode must be 'post' or 'pre'")
    return G, _norm(G)


def two_grid_report(A, split, transfer, sweeps, Delta_F=None):
    """``||G||``, ``||G_pre||`` and the two bounds assembled from measured norms."""
    p = _Pieces(A, split, transfer, sweeps, Delta_F)
    nF, nR = _norm(p.dF), _norm(p.dR)
    coupling = _norm(p.A_ff_inv @ p.dP @ p.Kinv)
    return GReport(
        g_norm=_norm(p.G()),
        g_pre_norm=_norm(p.G_pre()),
        bound_rho=nF + (1.0 + nF) * nR * coupling,
        bound_rho_pre=_norm(p.dF_hat) + _norm(p.D) * _norm(p.A_ff) * nR * coupling,
    )


def _fc_factors(p):
    """``E_F`` and ``I - Pi`` in F/C ordering."""
    nf, nc = p.split.n_f, p.split.n_c
    A = p.A_block()
    P = np.vstack([p.W, p.I_c])
    R = np.hstack([p.Z, p.I_c])
    Pi = P @ p.Kinv @ R @ A
    E_F = np.block([[p.dF, -p.D @ p.A_fc], [np.zeros((nc, nf)), p.I_c]])
    return E_F, np.eye(nf + nc) - Pi


def _fc_error(p):
    """Two-grid error propagation ``E_F (I - Pi)`` in F/C ordering."""
    E_F, Q = _fc_factors(p)
    return E_F @ Q


def two_grid_error(A, split, transfer, sweeps, Delta_F=None):
    """Dense two-grid error propagation, returned in the original (global) ordering."""
    p = _Pieces(A, split, transfer, sweeps, Delta_F)
    E = _fc_error(p)
    order = split.fc_order
    out = np.empty_like(E)
    out[np.ix_(order, order)] = E
    return out


def _rel(a, b, scale=None):
    scale = np.linalg.norm(a) if scale is None else max(np.linalg.norm(a), scale)
    diff = np.linalg.norm(a - b)
    return diff / scale if scale > 0 else diff


def verify_outer_product(A, split, transfer, sweeps, k_max, Delta_F=None):
    """Largest relative Frobenius error between dense powers of the error and
    residual propagators and their factored forms built from ``G^{k-1}``.

    Nearly nilpotent powers shrink far below their rounding error, so the
    ``k``-th power is measured against ``max(||E^k||, ||E_F|| ||I - Pi|| m^(k-1))``
    with ``m = max(||E||, ||G||)``: the size of the products that form it.
    The residual uses the same scale times ``||A|| ||A^{-1}||``.
    """
    if A.shape[0] > 500:
        raise ValueError("verify_outer_product is limited to n <= 500")
    if sweeps < 1 and Delta_F is None:
        raise ValueError("the residual factorization needs at least one F-relaxation sweep")
    p = _Pieces(A, split, transfer, sweeps, Delta_F)
    Afc = p.A_block()
    E_F, Q = _fc_factors(p)
    E = E_F @ Q
    try:
        A_inv = np.linalg.inv(Afc)
        Res = Afc @ E @ A_inv
        D_inv = np.linalg.inv(p.D)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("A or Delta_F is singular") from exc
    Ki, G = p.Kinv, p.G()
    e_left = np.vstack([p.dF - p.W_hat @ Ki @ p.dR, -Ki @ p.dR])
    e_right = np.hstack([p.I_f, -p.W])
    r_left = np.vstack([D_inv - p.A_ff, -(p.Z @ D_inv + p.A_cf)])
    r_right = np.hstack([p.D @ (p.I_f - p.dP @ Ki @ p.Z), -p.D @ p.dP @ Ki])
    worst = 0.0
    s_e = np.linalg.norm(E_F) * np.linalg.norm(Q)
    s_r = s_e * np.linalg.norm(Afc) * np.linalg.norm(A_inv)
    m_e = max(np.linalg.norm(E), np.linalg.norm(G))
    m_r = max(np.linalg.norm(Res), np.linalg.norm(G))
    Ek, Rk, Gk = E.copy(), Res.copy(), np.eye(split.n_f)
    for k in range(1, k_max + 1):
        if k > 1:
            Ek, Rk, Gk = Ek @ E, Rk @ Res, Gk @ G
        worst = max(worst, _rel(Ek, e_left @ Gk @ e_right, s_e * m_e ** (k - 1)),
                    _rel(Rk, r_left @ Gk @ r_right, s_r * m_r ** (k - 1)))
    return float(worst)


def verify_schur_identity(A, split, transfer):
    """Relative error of ``K - K_A = delta_R A_ff^{-1} delta_P`` with ``K = R A P``."""
    if A.shape[0] > 1000:
        raise ValueError("verify_schur_identity is limited to n <= 1000")
    p = _Pieces(A, split, transfer, sweeps=0)
    inv = p.A_ff_inv
    K_A = p.A_cc - p.A_cf @ inv @ p.A_fc
    lhs = p.K - K_A
    rhs = p.dR @ inv @ p.dP
    scale = np.linalg.norm(K_A)
    diff = np.linalg.norm(lhs - rhs)
    return float(diff / scale if scale > 0 else diff)


def probe_cycle(h: Hierarchy, level=0, kind=None, c_relax_on=None):
    """Dense error propagation of one cycle on ``level`` (scaled system, zero rhs).

    Column ``j`` is the cycle applied to the unit error ``e_j``.
    """
    n = h.scaled_operator(level).shape[0]
    if n > DENSE_CAP:
        raise ValueError("probing is limited to n <= %d" % DENSE_CAP)
    E = cycle(h, level, np.eye(n), np.zeros((n, n)), kind, c_relax_on=c_relax_on)
    if not np.all(np.isfinite(E)):
        raise ArithmeticError("probed propagation has non-finite entries")
    return E


def _coarse_inverse(h, level):
    """Dense ``K_hat^{-1}``: the V-cycle from zero on ``level`` as an operator on unscaled right-hand sides."""
    n = h.diag(level).shape[0]
    if n > 1000:
        raise ValueError("coarse probing is limited to 1000 unknowns")
    B = np.diag(1.0 / h.diag(level))
    X = cycle(h, level, np.zeros((n, n)), B, "V")
    if not np.all(np.isfinite(X)):
        raise ArithmeticError("probed coarse inverse has non-finite entries")
    return X


def multilevel_g(h: Hierarchy, level=0, return_matrix=False):
    """Multilevel ``G_hat`` with the coarse V-cycle standing in for ``K^{-1}``.

    Returns a :class:`GReport` with ``gamma``, ``||G_hat||``, the two-grid
    ``rho_TG = ||G|| max(1, ||A_cf||)`` and the sufficient-condition bound on
    ``gamma``; with ``return_matrix`` the dense ``G_hat`` is returned as well.
    """
    if level >= len(h.levels):
        raise ValueError("level %d has no coarse grid" % level)
    L = h.levels[level]
    if L.n > 1000:
        raise ValueError("multilevel_g is limited to 1000 unknowns per level")
    sweeps = h.options.sweeps
    p = _Pieces(L.A_scaled, L.split, L.transfer, sweeps)
    Kh_inv = _coarse_inverse(h, level + 1)
    # exact Galerkin product of this level (before filtering)
    K = _dense(L.K)
    dK_Kh = p.I_c - K @ Kh_inv
    a_cf = max(1.0, _norm(p.A_cf))
    gamma = _norm(dK_Kh) * a_cf
    top = np.hstack([p.dF @ (p.I_f - p.W_hat @ Kh_inv @ p.A_cf) + p.dF @ p.W @ Kh_inv @ p.A_cf,
                     p.dF @ p.W_hat @ Kh_inv - p.dF @ p.W @ Kh_inv])
    bottom = np.hstack([-dK_Kh @ p.A_cf, dK_Kh])
    G_hat = np.vstack([top, bottom])
    g_norm = _norm(p.G())
    rho_tg = g_norm * a_cf
    r2 = rho_tg ** 2
    gamma_bound = (-2 * r2 + math.sqrt(2 * (1 - r2))) / (2 * (r2 + 1)) if r2 < 1 else None
    rep = GReport(
        g_norm=g_norm,
        g_hat_norm=_norm(G_hat),
        gamma=gamma,
        rho_tg=rho_tg,
        gamma_bound=gamma_bound,
        condition_met=bool(gamma_bound is not None and gamma <= gamma_bound),
    )
    return (rep, G_hat) if return_matrix else rep


def nilpotency_check(A, h: Hierarchy, power_steps=None, seed=0):
    """Probe the multilevel error propagation of a triangular system and test nilpotency."""
    A = as_csr(A)
    n = A.shape[0]
    if n > 500:
        raise ValueError("nilpotency_check is limited to n <= 500")
    perm = topological_order(A)
    E = probe_cycle(h, 0)
    Ep = E[np.ix_(perm, perm)]
    upper = np.triu(Ep)
    max_upper = float(np.abs(upper).max()) if n else 0.0

    # power iteration; a nilpotent E annihilates any vector in at most n steps
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v) or 1.0
    rho = 0.0
    for _ in range(power_steps or n + 1):
        w = E @ v
        nw = np.linalg.norm(w)
        if nw == 0.0:
            rho = 0.0
            break
        rho = nw
        v = w / nw
    En = np.linalg.matrix_power(E, n) if n else E
    return NilpotencyReport(max_upper == 0.0 or max_upper <= 1e-12, max_upper, float(rho), _norm(En), n)
