"""Command-line interface: ``nair generate | solve | diagnose | bench``.

Exit codes: 0 success (for ``solve``: converged), 1 usage error, 2 numerical
failure or non-convergence, 3 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import diagnostics as diag
from .graph import NotTriangularError, scc
from .hierarchy import SolverOptions, setup
from .mmio import MatrixMarketError, read_matrix_market, write_matrix_market
from .problems import (
    TransportSpec,
    gen_chain,
    gen_near_triangular,
    gen_random_triangular,
    gen_transport,
)
from .solvers import BreakdownError, gmres, solve
from .sparse import DEFAULT_SEED, SingularMatrixError, as_csr
from .transfer import NeumannOptions, build_nair_restriction, ideal_operators, transfer_from_blocks

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def default_seed():
    raw = os.environ.get("NAIR_SEED")
    if raw is None:
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError:
        raise UsageError("NAIR_SEED must be an integer, got %r" % raw)


# --- problem specifications -------------------------------------------------



def parse_problem(text):
    """Parse ``kind:key=val,...`` into a generated problem.

    Kinds: ``transport`` and ``near`` (keys dim, n, velocity, theta, theta1,
    theta2, c, q, g; ``near`` also eps), ``chain`` (n, g) and ``random``
    (n, density, decay, seed).
    """
    kind, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise UsageError("problem parameter %r is not key=value" % item)
        params[key.strip()] = val.strip()
    try:
        if kind == "chain":
            _only(params, {"n", "g"})
            return gen_chain(int(params.get("n", 64)), float(params.get("g", 1.0)))
        if kind == "random":
            _only(params, {"n", "density", "decay", "seed"})
            return gen_random_triangular(
                int(params.get("n", 100)),
                float(params.get("density", 0.3)),
                float(params.get("decay", 0.5)),
                int(params.get("seed", default_seed())),
            )
        if kind in ("transport", "near"):
            allowed = {"dim", "n", "velocity", "theta", "theta1", "theta2", "c", "q", "g"}
            if kind == "near":
                allowed.add("eps")
            _only(params, allowed)
            dim = int(params.get("dim", 2))
            angle = None
            if "theta" in params:
                angle = float(params["theta"])
            if "theta1" in params or "theta2" in params:
                angle = (float(params.get("theta1", math.pi / 4)), float(params.get("theta2", math.pi / 8)))
            c = params.get("c", "inset")
            q = params.get("q", "zero")
            spec = TransportSpec(
                dim=dim,
                cells_per_axis=int(params.get("n", 32)),
                velocity=params.get("velocity", "constant"),
                angle=angle,
                c_field=c if c in ("inset", "block_source") else float(c),
                q_field=q if q in ("zero", "block_source") else float(q),
                inflow=float(params.get("g", 1.0)),
            )
            if kind == "near":
                eps = float(params["eps"]) if "eps" in params else None
                return gen_near_triangular(spec, eps)
            return gen_transport(spec)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, NotTriangularError):
            raise
        raise UsageError("bad problem %r: %s" % (text, exc))
    raise UsageError("unknown problem kind %r (expected transport, near, chain or random)" % kind)


def _only(params, allowed):
    extra = set(params) - allowed
    if extra:
        raise UsageError("unknown problem parameters: %s" % ", ".join(sorted(extra)))


def _read_vector(path, n):
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        data = json.loads(text)
        vec = np.asarray(data["b"] if isinstance(data, dict) else data, dtype=np.float64)
    else:
        vec = np.loadtxt(io.StringIO(text), dtype=np.float64, ndmin=1)
    if vec.shape != (n,):
        raise UsageError("rhs has %d entries, matrix has %d rows" % (vec.size, n))
    return vec


def load_system(args):
    """Return ``(A, b, x_exact, description)`` from ``--problem`` or ``--matrix``."""
    if bool(args.problem) == bool(args.matrix):
        raise UsageError("give exactly one of --problem or --matrix")
    if args.problem:
        prob = parse_problem(args.problem)
        b = prob.b
        if getattr(args, "rhs", None):
            b = _read_vector(args.rhs, prob.n)
        return prob.A, b, prob.x_exact, prob.description
    A = read_matrix_market(args.matrix)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise UsageError("matrix must be square, got %dx%d" % A.shape)
    x_exact = None
    if args.rhs:
        b = _read_vector(args.rhs, n)
    else:
        side = os.path.splitext(args.matrix)[0] + ".json"
        if os.path.exists(side):
            b = _read_vector(side, n)
            with open(side) as fh:
                data = json.load(fh)
            ref = data.get("x_exact") if isinstance(data, dict) else None
            if ref is not None and len(ref) == n:
                x_exact = np.asarray(ref, dtype=np.float64)
        else:
            x_exact = np.ones(n)
            b = A @ x_exact
    return A, b, x_exact, "matrix %s" % os.path.basename(args.matrix)


def solver_options(args, k=None):
    return SolverOptions(
        neumann_degree=args.k if k is None else k,
        restrict_strength=args.phi_restrict,
        split_strength=args.theta_split,
        filter_tol=args.filter_tol,
        max_coarse=args.max_coarse,
        max_levels=args.max_levels,
        f_relax_sweeps=args.sweeps,
        cycle=args.cycle.upper(),
        block_size=args.block_size,
    )


# --- output -----------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def emit_json(payload, out):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    _emit(json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n", out)


def emit_csv(rows, columns, out):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({c: ("" if row.get(c) is None else row.get(c)) for c in columns})
    _emit(buf.getvalue(), out)


# --- subcommands ------------------------------------------------------------

def cmd_generate(args):
    if not args.problem:
        raise UsageError("generate needs --problem")
    if not args.out:
        raise UsageError("generate needs --out PREFIX")
    prob = parse_problem(args.problem)
    prefix = args.out[:-4] if args.out.endswith(".mtx") else args.out
    write_matrix_market(prob.A, prefix + ".mtx")
    side = {
        "schema_version": SCHEMA_VERSION,
        "description": prob.description,
        "n": prob.n,
        "b": prob.b,
        "x_exact": prob.x_exact,
        "flow_order": prob.flow_order,
    }
    with open(prefix + ".json", "w") as fh:
        fh.write(json.dumps(_clean(side), sort_keys=True) + "\n")
    return EXIT_OK


def cmd_solve(args):
    A, b, x_exact, desc = load_system(args)
    opts = solver_options(args)
    h = setup(A, opts)
    if args.gmres:
        x, rep = gmres(A, b, precond=h, restart=args.restart, tol=args.tol, max_iters=args.max_iters)
    else:
        x, rep = solve(h, b, tol=args.tol, max_iters=args.max_iters)
    payload = {
        "command": "solve",
        "problem": desc,
        "n": A.shape[0],
        "nnz": A.nnz,
        "options": dict(opts.__dict__),
        "levels": h.summary(),
        "report": rep.to_dict(),
    }
    if x_exact is not None:
        payload["error_inf"] = float(np.abs(x - x_exact).max())
    if args.format == "csv":
        rows = [{"iteration": i, "residual": r} for i, r in enumerate(rep.residual_history)]
        emit_csv(rows, ["iteration", "residual"], args.out)
    else:
        emit_json(payload, args.out)
    return EXIT_OK if rep.converged else EXIT_NUMERIC


def _int_list(text):
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError("expected a comma-separated list of integers, got %r" % text)


def cmd_diagnose(args):
    A, b, _, desc = load_system(args)
    A = as_csr(A)
    n = A.shape[0]
    opts = solver_options(args)
    h = setup(A, opts)
    notes = []
    payload = {"command": "diagnose", "problem": desc, "n": n, "options": dict(opts.__dict__)}
    if not h.levels:
        notes.append("hierarchy has a single level; two-grid checks skipped")
        payload.update(notes=notes, delta_sweep=[], identities={}, nilpotency=None)
        return _finish_diagnose(args, payload, [])
    L = h.levels[0]
    A_s, split = L.A_scaled, L.split
    mode = "dense" if n <= diag.DENSE_CAP else "power"
    if mode == "power":
        notes.append("n=%d exceeds the dense cap; norms by power iteration, identity checks skipped" % n)

    rows = []
    ks = _int_list(args.ks)
    sweeps_list = _int_list(args.sweeps_list)
    if args.ideal:
        if n > diag.DENSE_CAP:
            raise UsageError("ideal-oracle mode needs n <= %d" % diag.DENSE_CAP)
        R_i, P_i, _ = ideal_operators(A_s, split)
        ideal = transfer_from_blocks(split, R_i[:, split.f_points], P_i[split.f_points, :])
        inv_ff = np.linalg.inv(L.A_ff.toarray())
    for k in ks:
        if args.ideal:
            tr, Delta = ideal, inv_ff
        else:
            Z, _, _ = build_nair_restriction(A_s, split, NeumannOptions(k, args.phi_restrict))
            tr = transfer_from_blocks(split, Z, L.transfer.W)
            Delta = None
        for s in sweeps_list:
            rep = diag.delta_constants(A_s, split, tr, s, k=k, phi=args.phi_restrict, Delta_F=Delta, mode=mode)
            rows.append(rep.to_dict())

    ident = {}
    if n <= 500:
        ident["outer_product_error"] = diag.verify_outer_product(A_s, split, L.transfer, max(opts.sweeps, 1), 4)
    else:
        notes.append("outer-product check skipped (n > 500)")
    if n <= 1000:
        ident["schur_identity_error"] = diag.verify_schur_identity(A_s, split, L.transfer)
        ident["two_grid"] = diag.two_grid_report(A_s, split, L.transfer, opts.sweeps).to_dict()
    else:
        notes.append("Schur identity and G checks skipped (n > 1000)")
    if len(h.levels) >= 1 and n <= 1000:
        try:
            ident["multilevel"] = diag.multilevel_g(h, 0).to_dict()
        except ValueError as exc:
            notes.append("multilevel check skipped: %s" % exc)

    nil = None
    if scc(A).is_triangular:
        if n <= 500:
            rep = diag.nilpotency_check(A, h)
            nil = rep.to_dict()
            nil["pass"] = bool(rep.is_strictly_triangular_in_order and rep.E_power_norm <= 1e-10)
        else:
            notes.append("nilpotency check skipped (n > 500)")
    else:
        notes.append("matrix is not triangular; nilpotency check not applicable")
    payload.update(notes=notes, delta_sweep=rows, identities=ident, nilpotency=nil)
    return _finish_diagnose(args, payload, rows)


DELTA_COLUMNS = ["k", "sweeps", "phi", "delta_F_norm", "delta_R_norm", "delta_P_norm", "delta_F_hat_norm", "mode"]


def _finish_diagnose(args, payload, rows):
    if args.format == "csv":
        emit_csv(rows, DELTA_COLUMNS, args.out)
    else:
        emit_json(payload, args.out)
    return EXIT_OK


BENCH_COLUMNS = ["size", "n", "k", "cycle", "iterations", "converged", "rho", "OC", "CC", "WPD",
                 "setup_seconds", "solve_seconds", "error"]


def cmd_bench(args):
    sizes = _int_list(args.sizes)
    ks = _int_list(args.ks_bench)
    cycles = [c.strip().upper() for c in args.cycles.split(",") if c.strip()]
    if not sizes or not ks or any(c not in ("V", "F") for c in cycles):
        raise UsageError("bench needs --sizes, --ks and --cycles from {v,f}")
    base = args.problem or "transport:dim=2"
    kind, _, rest = base.partition(":")
    if kind not in ("transport", "near"):
        raise UsageError("bench problems must be transport or near")
    params = [p for p in rest.split(",") if p and not p.startswith("n=")]
    rows = []
    for size in sizes:
        spec = "%s:%s" % (kind, ",".join(params + ["n=%d" % size]))
        for k in ks:
            for cyc in cycles:
                row = {"size": size, "k": k, "cycle": cyc}
                try:
                    prob = parse_problem(spec)
                    row["n"] = prob.n
                    opts = SolverOptions(**{**solver_options(args, k).__dict__, "cycle": cyc})
                    h = setup(prob.A, opts)
                    if args.gmres:
                        _, rep = gmres(prob.A, prob.b, precond=h, restart=args.restart,
                                       tol=args.tol, max_iters=args.max_iters)
                    else:
                        _, rep = solve(h, prob.b, tol=args.tol, max_iters=args.max_iters)
                    row.update(iterations=rep.iterations, converged=rep.converged, rho=rep.rho,
                               OC=rep.OC, CC=rep.CC, WPD=rep.WPD,
                               setup_seconds=rep.setup_seconds, solve_seconds=rep.solve_seconds)
                except (ArithmeticError, ValueError, MemoryError) as exc:
                    row["error"] = "%s: %s" % (type(exc).__name__, exc)
                rows.append(row)
    if args.format == "csv":
        emit_csv(rows, BENCH_COLUMNS, args.out)
    else:
        emit_json({"command": "bench", "problem": base, "rows": rows}, args.out)
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def _add_common(p):
    d = SolverOptions()
    p.add_argument("--problem", help="generated problem, e.g. transport:dim=2,n=64 or chain:n=100")
    p.add_argument("--matrix", help="Matrix Market file")
    p.add_argument("--rhs", help="right-hand side (.json with key 'b', or whitespace-separated text)")
    p.add_argument("--k", type=int, default=d.neumann_degree, help="Neumann degree")
    p.add_argument("--phi-restrict", type=float, default=d.restrict_strength)
    p.add_argument("--theta-split", type=float, default=d.split_strength)
    p.add_argument("--filter-tol", type=float, default=d.filter_tol)
    p.add_argument("--cycle", choices=["v", "f", "V", "F"], default=d.cycle.lower())
    p.add_argument("--sweeps", type=int, default=None, help="F-relaxation sweeps (default k+1)")
    p.add_argument("--max-coarse", type=int, default=d.max_coarse)
    p.add_argument("--max-levels", type=int, default=d.max_levels)
    p.add_argument("--block-size", type=int, default=d.block_size)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--gmres", action="store_true", help="accelerate with right-preconditioned GMRES")
    p.add_argument("--restart", type=int, default=50)
    p.add_argument("--out", help="output path (default stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser():
    parser = _Parser(prog="nair", description="nAIR reduction AMG solver and diagnostics")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    p = sub.add_parser("generate", help="write a generated problem as Matrix Market plus JSON")
    _add_common(p)
    p = sub.add_parser("solve", help="solve a system and write a convergence report")
    _add_common(p)
    p = sub.add_parser("diagnose", help="delta constants, identity checks and nilpotency")
    _add_common(p)
    p.add_argument("--ks", default="0,1,2,3", help="Neumann degrees for the delta sweep")
    p.add_argument("--sweeps-list", default="1,2,3,4", help="F-relaxation sweep counts for the delta sweep")
    p.add_argument("--ideal", action="store_true", help="use ideal transfer operators and exact F-solve")
    p = sub.add_parser("bench", help="convergence table over grid sizes, k and cycle type")
    _add_common(p)
    p.add_argument("--sizes", default="16,32,64", help="cells per axis")
    p.add_argument("--ks", dest="ks_bench", default="1,2")
    p.add_argument("--cycles", default="v")
    return parser


COMMANDS = {"generate": cmd_generate, "solve": cmd_solve, "diagnose": cmd_diagnose, "bench": cmd_bench}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write("nair: usage error: %s\n" % exc)
        return EXIT_USAGE
    except (OSError, MatrixMarketError, json.JSONDecodeError) as exc:
        sys.stderr.write("nair: I/O error: %s\n" % exc)
        return EXIT_IO
    except (ArithmeticError, BreakdownError, SingularMatrixError, NotTriangularError, np.linalg.LinAlgError) as exc:
        sys.stderr.write("nair: numerical failure: %s\n" % exc)
        return EXIT_NUMERIC
    except ValueError as exc:
        sys.stderr.write("nair: usage error: %s\n" % exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
