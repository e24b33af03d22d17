"""Test systems: upwind transport on structured grids, perturbations and random triangular matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import NotTriangularError, scc
from .sparse import DEFAULT_SEED, as_csr

__all__ = [
    "TransportSpec",
    "GeneratedProblem",
    "gen_transport",
    "gen_near_triangular",
    "gen_random_triangular",
    "gen_chain",
    "inset_c",
    "block_source_q",
    "velocity_field",
    "laplacian",
    "INSIDE",
    "OUTSIDE",
]

INSIDE = 1e4
OUTSIDE = 1e-4
DEFAULT_THETA = 3 * math.pi / 16
DEFAULT_THETA_3D = (math.pi / 4, math.pi / 8)


def _in_block(x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return np.all(np.abs(x - 0.5) <= 0.25, axis=-1)


def inset_c(x):
    """Reaction coefficient: large inside the centered block of side 0.5 (closed), tiny outside."""
    inside = _in_block(x)
    out = np.where(inside, INSIDE, OUTSIDE)
    return float(out[0]) if np.ndim(x) == 1 else out


def block_source_q(x):
    """Unit source inside the centered block, zero outside."""
    inside = _in_block(x)
    out = inside.astype(np.float64)
    return float(out[0]) if np.ndim(x) == 1 else out


def velocity_field(name, x, angle=None):
    """Velocity at point(s) ``x`` (shape ``(d,)`` or ``(m, d)``).

    ``constant`` uses ``angle``: a scalar for 2D, ``(theta1, theta2)`` for 3D;
    1D constant flow is unit speed to the right.
    """
    x = np.asarray(x, dtype=np.float64)
    pts = np.atleast_2d(x)
    dim = pts.shape[1]
    if name == "constant":
        if dim == 1:
            v = np.ones((len(pts), 1))
        elif dim == 2:
            th = DEFAULT_THETA if angle is None else float(angle)
            v = np.tile([math.cos(th), math.sin(th)], (len(pts), 1))
        elif dim == 3:
            t1, t2 = DEFAULT_THETA_3D if angle is None else angle
            v = np.tile(
                [math.sin(t1) * math.cos(t2), math.sin(t1) * math.sin(t2), math.cos(t1) * math.cos(t2)],
                (len(pts), 1),
            )
        else:
            raise ValueError("dimension must be 1, 2 or 3")
    elif name in ("b1", "b2", "b3"):
        if dim != 2:
            raise ValueError("velocity field %s is two-dimensional" % name)
        px, py = pts[:, 0], pts[:, 1]
        if name == "b1":
            v = np.column_stack([np.cos(np.pi * py) ** 2, np.cos(np.pi * px) ** 2])
        elif name == "b2":
            v = np.column_stack([np.sin(np.pi * py) ** 2, np.sin(np.pi * px) ** 2])
        else:
            v = np.column_stack([py ** 4, np.cos(np.pi * px / 2) ** 2])
    else:
        raise ValueError("unknown velocity field %r" % (name,))
    return v[0] if x.ndim == 1 else v


@dataclass(frozen=True)
class TransportSpec:
    """Steady upwind transport ``b . grad u + c u = q`` on the unit square/cube.

    ``velocity`` is ``"constant"``, ``"b1"``, ``"b2"``, ``"b3"`` or a callable
    mapping an ``(m, d)`` array of points to ``(m, d)`` velocities.  ``c_field``
    is ``"inset"``, ``"block_source"``, a number or a callable; ``q_field`` is
    ``"zero"``, ``"block_source"``, a number or a callable.  Inflow boundaries
    carry the value ``inflow``.
    """

    dim: int = 2
    cells_per_axis: int = 16
    velocity: str | Callable = "constant"
    angle: float | tuple | None = None
    c_field: str | float | Callable = "inset"
    q_field: str | float | Callable = "zero"
    inflow: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError("dim must be 1, 2 or 3, got %r" % (self.dim,))
        if self.cells_per_axis < 2:
            raise ValueError("cells_per_axis must be >= 2")

    @property
    def n(self):
        return self.cells_per_axis ** self.dim

    @property
    def h(self):
        return 1.0 / self.cells_per_axis


@dataclass
class GeneratedProblem:
    A: sp.csr_matrix
    b: np.ndarray
    x_exact: np.ndarray | None = None
    description: str = ""
    flow_order: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.A.shape[0]


def _cell_centers(spec):
    return (np.column_stack(_grid_index(spec)) + 0.5) * spec.h


def _grid_index(spec):
    m = spec.cells_per_axis
    idx = np.arange(spec.n)
    return [(idx // m ** d) % m for d in range(spec.dim)]


def _eval_field(f, pts, zero_name):
    if callable(f):
        return np.asarray(f(pts), dtype=np.float64).reshape(len(pts))
    if isinstance(f, (int, float)):
        return np.full(len(pts), float(f))
    if f in ("inset", "block_source") and zero_name == "c":
        return inset_c(pts)
    if f == "block_source" and zero_name == "q":
        return block_source_q(pts)
    if f == "zero":
        return np.zeros(len(pts))
    raise ValueError("unknown %s field %r" % (zero_name, f))


def _advection(spec):
    """Upwind advection matrix and inflow contributions to the right-hand side."""
    n, m, h = spec.n, spec.cells_per_axis, spec.h
    pts = _cell_centers(spec)
    if callable(spec.velocity):
        vel = np.asarray(spec.velocity(pts), dtype=np.float64).reshape(n, spec.dim)
    else:
        vel = velocity_field(spec.velocity, pts, spec.angle)
    coords = _grid_index(spec)
    idx = np.arange(n)
    rows, cols, vals = [idx], [idx], [np.abs(vel).sum(axis=1) / h]
    rhs = np.zeros(n)
    for d in range(spec.dim):
        bd = vel[:, d]
        stride = m ** d
        pos, neg = bd > 0, bd < 0
        # positive component: upwind cell is one step back along axis d
        inner = pos & (coords[d] > 0)
        rows.append(idx[inner]); cols.append(idx[inner] - stride); vals.append(-bd[inner] / h)
        edge = pos & (coords[d] == 0)
        rhs[edge] += bd[edge] / h * spec.inflow
        inner = neg & (coords[d] < m - 1)
        rows.append(idx[inner]); cols.append(idx[inner] + stride); vals.append(bd[inner] / h)
        edge = neg & (coords[d] == m - 1)
        rhs[edge] += -bd[edge] / h * spec.inflow
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return as_csr(A), rhs, vel, pts


def _triangular_solve(A, b, perm):
    Ap = as_csr(A[perm, :][:, perm])
    y = spla.spsolve_triangular(Ap, b[perm], lower=True)
    x = np.empty_like(y)
    x[perm] = y
    return x


def gen_transport(spec: TransportSpec):
    """First-order upwind finite differences for steady transport.

    Unknowns sit at cell centers in lexicographic order (first axis fastest).
    Each term ``b_i d_i u`` becomes ``b_i (u - u_upwind) / h`` with the
    velocity evaluated at the cell center; inflow ghost values are moved to the
    right-hand side and the reaction coefficient is added to the diagonal.
    Flows that couple cells in a cycle are rejected.
    """
    A_adv, rhs, vel, pts = _advection(spec)
    c = _eval_field(spec.c_field, pts, "c")
    q = _eval_field(spec.q_field, pts, "q")
    A = as_csr(A_adv + sp.diags(c))
    b = q + rhs
    dec = scc(A)
    if not dec.is_triangular:
        big = [s for s in dec.sizes if s > 1]
        raise NotTriangularError(
            "velocity field couples cells cyclically: %d strongly connected components of sizes %s"
            % (len(big), big[-5:]),
            max(big),
        )
    if np.all(vel >= 0):
        order = np.arange(spec.n)
    else:
        order = np.concatenate(dec.components)
    x = _triangular_solve(A, b, order)
    name = spec.velocity if isinstance(spec.velocity, str) else "custom"
    desc = "transport dim=%d m=%d velocity=%s c=%s q=%s" % (
        spec.dim, spec.cells_per_axis, name,
        spec.c_field if not callable(spec.c_field) else "custom",
        spec.q_field if not callable(spec.q_field) else "custom",
    )
    return GeneratedProblem(A, b, x, desc, order, {"spec": spec})


def gen_chain(n, inflow=1.0):
    """1D upwind chain with unit speed and no reaction."""
    return gen_transport(TransportSpec(dim=1, cells_per_axis=n, c_field=0.0, inflow=inflow))


def laplacian(dim, m):
    """``2d+1``-point negative Laplacian scaled by ``1/h^2`` with zero-flux boundaries.

    Rows sum to zero, so adding it leaves constant solutions unchanged.
    """
    h = 1.0 / m
    e = np.ones(m)
    T = sp.diags([-e[:-1], 2 * e, -e[:-1]], [-1, 0, 1]).tolil()
    T[0, 0] = T[m - 1, m - 1] = 1.0
    T = sp.csr_matrix(T)
    I = sp.identity(m, format="csr")
    L = sp.csr_matrix((m ** dim, m ** dim))
    for d in range(dim):
        term = sp.identity(1, format="csr")
        for k in range(dim - 1, -1, -1):
            term = sp.kron(term, T if k == d else I, format="csr")
        L = L + term
    return as_csr(L / h ** 2)


def gen_near_triangular(base: TransportSpec, epsilon=None):
    """Transport matrix plus ``epsilon`` times a diffusion stencil; ``epsilon`` defaults to ``1e-3 h``."""
    eps = 1e-3 * base.h if epsilon is None else float(epsilon)
    if eps < 0:
        raise ValueError("epsilon must be >= 0")
    prob = gen_transport(base)
    if eps == 0:
        return prob
    A = as_csr(prob.A + eps * laplacian(base.dim, base.cells_per_axis))
    return GeneratedProblem(
        A, prob.b.copy(), None, prob.description + " diffusion=%.3g" % eps, None,
        {"spec": base, "epsilon": eps},
    )


def gen_random_triangular(n, density=0.3, decay=0.5, seed=DEFAULT_SEED):
    """Seeded unit-lower-triangular matrix with decaying random-sign entries.

    The right-hand side is ``A @ 1`` so the exact solution is all ones.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    if decay <= 0:
        raise ValueError("decay must be positive")
    rng = np.random.default_rng(seed)
    i, j = np.tril_indices(n, -1)
    keep = rng.random(len(i)) < density
    i, j = i[keep], j[keep]
    mag = rng.random(len(i)) * np.exp(-decay * (i - j))
    sign = np.where(rng.random(len(i)) < 0.5, -1.0, 1.0)
    rows = np.concatenate([np.arange(n), i])
    cols = np.concatenate([np.arange(n), j])
    vals = np.concatenate([np.ones(n), sign * mag])
    A = as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))
    x = np.ones(n)
    return GeneratedProblem(
        A, A @ x, x, "random triangular n=%d density=%g decay=%g seed=%d" % (n, density, decay, seed),
        np.arange(n), {"seed": seed},
    )
