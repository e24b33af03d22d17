"""Matrix Market coordinate I/O (real, general, 1-based on disk)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .sparse import as_csr

HEADER = "%%MatrixMarket matrix coordinate real general"


class MatrixMarketError(ValueError):
    pass


def write_matrix_market(A, path):
    A = as_csr(A)
    coo = A.tocoo()
    with open(path, "w") as fh:
        fh.write(HEADER + "\n")
        fh.write("%d %d %d\n" % (A.shape[0], A.shape[1], A.nnz))
        for i, j, v in zip(coo.row, coo.col, coo.data):
            fh.write("%d %d %.17g\n" % (i + 1, j + 1, v))


def read_matrix_market(path):
    """Read a coordinate real general file; duplicate coordinates are summed."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("%s: empty file" % path)
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket" or [h.lower() for h in head[1:]] != [
        "matrix", "coordinate", "real", "general"
    ]:
        raise MatrixMarketError("%s: unsupported header %r" % (path, lines[0]))
    body = [ln for ln in lines[1:] if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError("%s: missing size line" % path)
    try:
        nrows, ncols, nnz = (int(t) for t in body[0].split())
    except ValueError as exc:
        raise MatrixMarketError("%s: bad size line %r" % (path, body[0])) from exc
    entries = body[1:]
    if len(entries) != nnz:
        raise MatrixMarketError("%s: declared %d entries, found %d" % (path, nnz, len(entries)))
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.float64)
    for k, ln in enumerate(entries):
        parts = ln.split()
        if len(parts) != 3:
            raise MatrixMarketError("%s: bad entry line %r" % (path, ln))
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError as exc:
            raise MatrixMarketError("%s: non-numeric entry %r" % (path, ln)) from exc
        if not (1 <= i <= nrows and 1 <= j <= ncols):
            raise MatrixMarketError("%s: index (%d, %d) outside %dx%d" % (path, i, j, nrows, ncols))
        rows[k], cols[k], vals[k] = i - 1, j - 1, v
    return as_csr(sp.coo_matrix((vals, (rows, cols)), shape=(nrows, ncols)))
