"""nAIR: reduction-based algebraic multigrid for (near-)triangular sparse systems."""

from .graph import CfSplitting, NotTriangularError, rs_split, scc, strength, topological_order
from .hierarchy import Hierarchy, SolverOptions, complexity, setup
from .problems import (
    TransportSpec,
    gen_chain,
    gen_near_triangular,
    gen_random_triangular,
    gen_transport,
)
from .solvers import ConvergenceReport, gmres, solve, v_cycle, wpd

__version__ = "0.1.0"

__all__ = [
    "CfSplitting",
    "ConvergenceReport",
    "Hierarchy",
    "NotTriangularError",
    "SolverOptions",
    "TransportSpec",
    "complexity",
    "gen_chain",
    "gen_near_triangular",
    "gen_random_triangular",
    "gen_transport",
    "gmres",
    "rs_split",
    "scc",
    "setup",
    "solve",
    "strength",
    "topological_order",
    "v_cycle",
    "wpd",
]
