"""Multigrid cycles, the stationary iteration and right-preconditioned GMRES.

Cycles act on the unit-diagonal scaled system of each level.  Vectors may be
1-d or 2-d (a block of columns); the block form is used by the probing
diagnostics to assemble error propagation matrices in one pass.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .hierarchy import Hierarchy, complexity
from .sparse import DimensionError

__all__ = [
    "BreakdownError",
    "ConvergenceReport",
    "WorkCounter",
    "f_relax",
    "c_relax",
    "v_cycle",
    "f_mg_cycle",
    "cycle",
    "solve",
    "gmres",
    "wpd",
    "convergence_factor",
]


class BreakdownError(ArithmeticError):
    pass


@dataclass
class WorkCounter:
    """Accumulates nnz touched by cycle operations."""

    total: int = 0

    def add(self, n):
        self.total += int(n)


def _div(b, d):
    return b / d if b.ndim == 1 else b / d[:, None]


def f_relax(level, x, b, sweeps, work=None):
    """Jacobi sweeps over F-rows of the unit-diagonal system ``x_f += b_f - A_ff x_f - A_fc x_c``."""
    F, C = level.split.f_points, level.split.c_points
    x = x.copy()
    xc = x[C]
    for _ in range(sweeps):
        xf = x[F]
        x[F] = xf + b[F] - level.A_ff @ xf - level.A_fc @ xc
        if work is not None:
            work.add(level.A_ff.nnz + level.A_fc.nnz)
    return x


def c_relax(level, x, b, sweeps=1, work=None):
    """Jacobi sweeps over C-rows of the unit-diagonal system."""
    F, C = level.split.f_points, level.split.c_points
    x = x.copy()
    xf = x[F]
    for _ in range(sweeps):
        xc = x[C]
        x[C] = xc + b[C] - level.A_cf @ xf - level.A_cc @ xc
        if work is not None:
            work.add(level.A_cf.nnz + level.A_cc.nnz)
    return x


def _coarse_solve(h, b, work):
    if work is not None:
        work.add(h.coarsest.A.nnz)
    return h.coarsest.lu.solve(b)


def _restrict(h, lvl, x, b, work):
    L = h.levels[lvl]
    r = b - L.A_scaled @ x
    bc = _div(L.transfer.R @ r, h.diag(lvl + 1))
    if work is not None:
        work.add(L.A_scaled.nnz + L.transfer.R.nnz)
    return bc


def _correct_and_relax(h, lvl, x, b, xc, work, c_relax_on):
    L = h.levels[lvl]
    opts = h.options
    x = x + L.transfer.P @ xc
    if work is not None:
        work.add(L.transfer.P.nnz)
    x = f_relax(L, x, b, opts.sweeps, work)
    if c_relax_on:
        x = c_relax(L, x, b, opts.c_relax_sweeps, work)
    return x


def v_cycle(h: Hierarchy, level, x, b, work=None, c_relax_on=None):
    """One V-cycle on ``level`` for the scaled system; returns the new iterate.

    No pre-relaxation; the coarse correction is followed by F-relaxation
    (and C-relaxation when enabled).
    """
    if c_relax_on is None:
        c_relax_on = h.options.enable_c_relax
    if level == len(h.levels):
        return _coarse_solve(h, b, work)
    bc = _restrict(h, level, x, b, work)
    zero = np.zeros((h.diag(level + 1).shape[0],) + b.shape[1:])
    xc = v_cycle(h, level + 1, zero, bc, work, c_relax_on)
    return _correct_and_relax(h, level, x, b, xc, work, c_relax_on)


def f_mg_cycle(h: Hierarchy, level, x, b, work=None, c_relax_on=None):
    """One F-cycle: the coarse problem gets an F-cycle followed by a V-cycle."""
    if c_relax_on is None:
        c_relax_on = h.options.enable_c_relax
    if level == len(h.levels):
        return _coarse_solve(h, b, work)
    bc = _restrict(h, level, x, b, work)
    if level + 1 == len(h.levels):
        xc = _coarse_solve(h, bc, work)
    else:
        zero = np.zeros((h.diag(level + 1).shape[0],) + b.shape[1:])
        xc = f_mg_cycle(h, level + 1, zero, bc, work, c_relax_on)
        xc = v_cycle(h, level + 1, xc, bc, work, c_relax_on)
    return _correct_and_relax(h, level, x, b, xc, work, c_relax_on)


def cycle(h, level, x, b, kind=None, work=None, c_relax_on=None):
    kind = (kind or h.options.cycle).upper()
    fn = v_cycle if kind == "V" else f_mg_cycle
    return fn(h, level, x, b, work, c_relax_on)


def wpd(rho, cc):
    """Work per digit of residual reduction, ``-CC / log10(rho)``; None when undefined."""
    if rho is None or not np.isfinite(rho) or rho <= 0.0 or rho >= 1.0:
        return None
    return -cc / math.log10(rho)


def convergence_factor(history, window=5):
    """Geometric mean of the last ``min(window, iters - 1)`` residual ratios.

    The first ratio is skipped as a transient whenever more than one exists;
    zero residuals end the history early.
    """
    hist = [float(r) for r in history]
    iters = len(hist) - 1
    if iters < 1:
        return None
    m = min(window, iters - 1) if iters > 1 else 1
    tail = hist[-(m + 1):]
    if tail[0] == 0.0:
        return None
    if tail[-1] == 0.0:
        return 0.0
    return float((tail[-1] / tail[0]) ** (1.0 / m))


@dataclass
class ConvergenceReport:
    residual_history: list
    rho: float | None
    iterations: int
    converged: bool
    OC: float
    CC: float
    WPD: float | None
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    method: str = "amg"
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "method": self.method,
            "iterations": self.iterations,
            "converged": self.converged,
            "rho": self.rho,
            "OC": self.OC,
            "CC": self.CC,
            "WPD": self.WPD,
            "residual_history": list(self.residual_history),
            "setup_seconds": self.setup_seconds,
            "solve_seconds": self.solve_seconds,
            "notes": list(self.notes),
        }


def solve(h: Hierarchy, b, x0=None, tol=1e-10, max_iters=100, kind=None):
    """Stationary AMG iteration on the input system.

    Stops when the true relative residual ``||b - A x|| / ||b - A x0||`` reaches
    ``tol``; an ``x0`` whose residual is already below ``tol ||b||`` is returned
    unchanged.  Returns ``(x, report)``.
    """
    A = h.A_input
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (A.shape[0],):
        raise DimensionError("rhs has shape %s, expected (%d,)" % (b.shape, A.shape[0]))
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64)
    kind = (kind or h.options.cycle).upper()
    t0 = time.perf_counter()
    bs = h.scale_rhs(b)
    r0 = float(np.linalg.norm(b - A @ x))
    hist = [r0]
    # an initial guess already accurate relative to b needs no cycles
    converged = r0 == 0.0 or (x0 is not None and r0 <= tol * np.linalg.norm(b))
    it = 0
    while not converged and it < max_iters:
        x = cycle(h, 0, x, bs, kind)
        it += 1
        nr = float(np.linalg.norm(b - A @ x))
        if not np.isfinite(nr):
            raise BreakdownError("non-finite residual at iteration %d" % it)
        hist.append(nr)
        converged = nr <= tol * r0
    elapsed = time.perf_counter() - t0
    oc, cc = complexity(h, kind)
    rho = convergence_factor(hist)
    report = ConvergenceReport(
        hist, rho, it, converged, oc, cc, wpd(rho, cc),
        setup_seconds=h.setup_seconds, solve_seconds=elapsed,
        method="amg-%s" % kind.lower(), notes=list(h.notes),
    )
    return x, report


def _as_preconditioner(precond):
    if precond is None:
        return (lambda v: v), None
    if isinstance(precond, Hierarchy):
        h = precond
        return (lambda v: cycle(h, 0, np.zeros_like(v), h.scale_rhs(v))), h
    if callable(precond):
        return precond, None
    raise TypeError("preconditioner must be a Hierarchy, a callable or None")


def gmres(A, b, x0=None, precond=None, restart=50, tol=1e-10, max_iters=100):
    """Restarted GMRES with right preconditioning ``A M^{-1} y = b``, ``x = M^{-1} y``.

    ``max_iters`` counts inner iterations (one matvec and one preconditioner
    application each).  Convergence is judged on the true relative residual.
    Returns ``(x, report)``; for a hierarchy preconditioner ``CC`` is the cycle
    complexity plus one for the matvec with ``A``.
    """
    t0 = time.perf_counter()
    A = sp.csr_matrix(A) if not sp.issparse(A) else A
    b = np.asarray(b, dtype=np.float64)
    n = A.shape[0]
    if b.shape != (n,):
        raise DimensionError("rhs has shape %s, expected (%d,)" % (b.shape, n))
    apply_m, h = _as_preconditioner(precond)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=np.float64)
    r = b - A @ x
    r0 = float(np.linalg.norm(r))
    hist = [r0]
    target = tol * r0
    converged = r0 == 0.0 or (x0 is not None and r0 <= tol * np.linalg.norm(b))
    it = 0
    eps = np.finfo(float).eps
    while not converged and it < max_iters:
        beta = float(np.linalg.norm(r))
        m = min(restart, max_iters - it)
        V = np.zeros((n, m + 1))
        Zs = np.zeros((n, m))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[:, 0] = r / beta
        j_done = 0
        lucky = False
        for j in range(m):
            Zs[:, j] = apply_m(V[:, j])
            w = A @ Zs[:, j]
            for i in range(j + 1):
                H[i, j] = w @ V[:, i]
                w = w - H[i, j] * V[:, i]
            H[j + 1, j] = np.linalg.norm(w)
            if not np.all(np.isfinite(H[: j + 2, j])):
                raise BreakdownError("non-finite Arnoldi coefficients at iteration %d" % (it + 1))
            lucky = H[j + 1, j] <= eps * max(1.0, abs(H[j, j])) * 10
            if not lucky:
                V[:, j + 1] = w / H[j + 1, j]
            for i in range(j):
                t = cs[i] * H[i, j] + sn[i] * H[i + 1, j]
                H[i + 1, j] = -sn[i] * H[i, j] + cs[i] * H[i + 1, j]
                H[i, j] = t
            den = math.hypot(H[j, j], H[j + 1, j])
            if den == 0.0:
                raise BreakdownError("GMRES breakdown: singular Hessenberg at iteration %d" % (it + 1))
            cs[j], sn[j] = H[j, j] / den, H[j + 1, j] / den
            H[j, j] = den
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]
            it += 1
            j_done = j + 1
            hist.append(abs(g[j + 1]))
            if abs(g[j + 1]) <= target or lucky:
                break
        y = np.linalg.solve(np.triu(H[:j_done, :j_done]), g[:j_done]) if j_done else np.zeros(0)
        x = x + Zs[:, :j_done] @ y
        r = b - A @ x
        nr = float(np.linalg.norm(r))
        if not np.isfinite(nr):
            raise BreakdownError("non-finite residual after restart")
        hist[-1] = nr
        converged = nr <= target
        if lucky and not converged and nr >= hist[0]:
            # invariant subspace reached without progress; restarting cannot help
            break
    elapsed = time.perf_counter() - t0
    if h is not None:
        oc, cc = complexity(h)
        cc += 1.0
        setup = h.setup_seconds
        notes = list(h.notes)
    else:
        oc, cc, setup, notes = 1.0, 1.0, 0.0, []
    rho = convergence_factor(hist)
    report = ConvergenceReport(
        hist, rho, it, converged, oc, cc, wpd(rho, cc),
        setup_seconds=setup, solve_seconds=elapsed,
        method="gmres(%d)" % restart, notes=notes,
    )
    return x, report
