"""Human-inspectable text formats for graphs, vertex data and operators.

* graph file: header line ``V E``, then E lines ``u v w`` with 0-based
  vertex ids, ``u < v`` and a decimal weight;
* vector file: one row per vertex, space-separated decimals;
* operator file: header line ``N V`` followed by N dense rows of V values.

All writers use ``%.17g`` so files round-trip exactly and identical data
produces byte-identical files.
"""

import numpy as np

from .graph import build_graph_arrays

__all__ = ["FileFormatError", "read_graph", "write_graph",
           "read_matrix", "write_matrix", "read_operator", "write_operator"]


class FileFormatError(ValueError):
    """Malformed input file; the message carries ``path:line``."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _fmt(value):
    return "%.17g" % value


def read_graph(path):
    """Parse a graph file into a :class:`~gtvcut.graph.Graph`."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FileFormatError(path, 1, "empty file, expected 'V E' header")
    head = lines[0].split()
    if len(head) != 2:
        raise FileFormatError(path, 1, "header must be 'V E'")
    try:
        nv, ne = int(head[0]), int(head[1])
    except ValueError:
        raise FileFormatError(path, 1, "header must hold two integers") from None
    if len(lines) - 1 < ne:
        raise FileFormatError(path, len(lines), f"expected {ne} edge lines, found {len(lines) - 1}")
    eu = np.empty(ne, dtype=np.int64)
    ev = np.empty(ne, dtype=np.int64)
    ew = np.empty(ne, dtype=np.float64)
    for i in range(ne):
        lineno = i + 2
        parts = lines[i + 1].split()
        if len(parts) != 3:
            raise FileFormatError(path, lineno, "edge line must be 'u v w'")
        try:
            u, v, w = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise FileFormatError(path, lineno, f"cannot parse edge line {lines[i + 1]!r}") from None
        if not 0 <= u < nv or not 0 <= v < nv:
            raise FileFormatError(path, lineno, f"vertex id out of range 0..{nv - 1}")
        if u >= v:
            raise FileFormatError(path, lineno, "edge endpoints must satisfy u < v")
        if w < 0:
            raise FileFormatError(path, lineno, "edge weight must be nonnegative")
        eu[i], ev[i], ew[i] = u, v, w
    return build_graph_arrays(eu, ev, ew, nv)


def write_graph(path, graph):
    with open(path, "w") as f:
        f.write(f"{graph.num_vertices} {graph.num_edges}\n")
        for u, v, w in zip(graph.edge_u, graph.edge_v, graph.edge_weight):
            f.write(f"{u} {v} {_fmt(w)}\n")


def read_matrix(path, expected_rows=None):
    """Read a vector file into a (rows, n) float array."""
    with open(path) as f:
        lines = f.read().splitlines()
    rows = []
    width = None
    for i, line in enumerate(lines):
        parts = line.split()
        if not parts:
            continue
        if width is None:
            width = len(parts)
        elif len(parts) != width:
            raise FileFormatError(path, i + 1, f"expected {width} values, found {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FileFormatError(path, i + 1, f"cannot parse row {line!r}") from None
    if not rows:
        raise FileFormatError(path, 1, "no data rows")
    out = np.array(rows, dtype=np.float64)
    if expected_rows is not None and out.shape[0] != expected_rows:
        raise FileFormatError(path, len(lines), f"expected {expected_rows} rows, found {out.shape[0]}")
    return out


def write_matrix(path, x):
    x = np.atleast_2d(np.asarray(x, dtype=np.float64).T).T
    with open(path, "w") as f:
        for row in x:
            f.write(" ".join(_fmt(v) for v in row) + "\n")


def read_operator(path):
    """Read an operator file into an (N, V) dense array."""
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines:
        raise FileFormatError(path, 1, "empty file, expected 'N V' header")
    head = lines[0].split()
    if len(head) != 2:
        raise FileFormatError(path, 1, "header must be 'N V'")
    try:
        n, v = int(head[0]), int(head[1])
    except ValueError:
        raise FileFormatError(path, 1, "header must hold two integers") from None
    if len(lines) - 1 < n:
        raise FileFormatError(path, len(lines), f"expected {n} rows, found {len(lines) - 1}")
    out = np.empty((n, v), dtype=np.float64)
    for i in range(n):
        parts = lines[i + 1].split()
        if len(parts) != v:
            raise FileFormatError(path, i + 2, f"expected {v} values, found {len(parts)}")
        try:
            out[i] = [float(p) for p in parts]
        except ValueError:
            raise FileFormatError(path, i + 2, "cannot parse operator row") from None
    return out


def write_operator(path, phi):
    phi = np.asarray(phi, dtype=np.float64)
    with open(path, "w") as f:
        f.write(f"{phi.shape[0]} {phi.shape[1]}\n")
        for row in phi:
            f.write(" ".join(_fmt(v) for v in row) + "\n")
