"""Weighted undirected graphs and the discrete graph Laplacian.

The Laplacian follows the diffusion sign convention

    (Δf)(x) = Σ_{y~x} w(x, y) [f(y) - f(x)],

so the matrix has non-negative off-diagonal entries, non-positive diagonal
and zero row sums.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
import scipy.io
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order

from .errors import (
    AsymmetryError,
    DimensionMismatch,
    GraphError,
    ParseError,
    SelfLoopError,
)


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """Undirected graph with strictly positive edge weights.

    Each undirected edge is stored once as ``(u[k], v[k], w[k])`` with
    0-based node indices. ``coords`` is an optional ``(n, 2)`` array of planar
    positions, only used when writing plot data.
    """

    node_count: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    coords: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise GraphError(f"node_count must be positive, got {n}")
        u = np.asarray(self.u, dtype=np.int64).ravel()
        v = np.asarray(self.v, dtype=np.int64).ravel()
        w = np.asarray(self.w, dtype=np.float64).ravel()
        if not (u.shape == v.shape == w.shape):
            raise GraphError("edge arrays u, v, w must have equal length")
        if u.size:
            if min(u.min(), v.min()) < 0 or max(u.max(), v.max()) >= n:
                raise GraphError("edge endpoint outside [0, node_count)")
            if np.any(u == v):
                k = int(np.flatnonzero(u == v)[0])
                raise SelfLoopError(f"self-loop at node {int(u[k])}")
            if not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise GraphError("edge weights must be finite and strictly positive")
            lo, hi = np.minimum(u, v), np.maximum(u, v)
            keys = lo * n + hi
            if np.unique(keys).size != keys.size:
                raise GraphError("duplicate undirected edge")
        coords = self.coords
        if coords is not None:
            coords = np.asarray(coords, dtype=np.float64)
            if coords.shape != (n, 2):
                raise GraphError(f"coords must have shape ({n}, 2), got {coords.shape}")
        for name, value in (("node_count", n), ("u", u), ("v", v), ("w", w), ("coords", coords)):
            object.__setattr__(self, name, value)

    @classmethod
    def from_edges(cls, node_count, edges, coords=None) -> "WeightedGraph":
        """Build from an iterable of ``(u, v)`` or ``(u, v, w)`` tuples."""
        us, vs, ws = [], [], []
        for e in edges:
            us.append(e[0])
            vs.append(e[1])
            ws.append(e[2] if len(e) > 2 else 1.0)
        return cls(node_count, np.array(us, dtype=np.int64), np.array(vs, dtype=np.int64),
                   np.array(ws, dtype=np.float64), coords)

    @property
    def edge_count(self) -> int:
        return int(self.u.size)

    @property
    def edges(self) -> Iterator[tuple]:
        for a, b, c in zip(self.u.tolist(), self.v.tolist(), self.w.tolist()):
            yield a, b, c

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric weighted adjacency matrix."""
        n = self.node_count
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        data = np.concatenate([self.w, self.w])
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


@dataclass(frozen=True, eq=False)
class LaplacianOperator:
    """Sparse symmetric graph Laplacian in CSR form."""

    matrix: sp.csr_matrix

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    def apply(self, f):
        return apply_laplacian(self, f)

    def edge_arrays(self):
        """Return ``(i, j, w)`` for the strictly upper triangle (one entry per edge)."""
        upper = sp.triu(self.matrix, k=1).tocoo()
        return upper.row, upper.col, upper.data

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()


def load_coords(path, node_count: int) -> np.ndarray:
    """Read a whitespace separated ``x y`` file, one line per node."""
    try:
        xy = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if xy.shape != (node_count, 2):
        raise ParseError(f"{path}: expected {node_count} lines of 'x y', got shape {xy.shape}")
    return xy


def load_matrix_market(path, coords_path=None) -> WeightedGraph:
    """Read a Matrix Market coordinate file as an undirected weighted graph.

    Pattern files give unit weights. Duplicate entries are summed with a
    warning. Indices are converted from the file's 1-based convention to
    0-based node ids.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            mat = scipy.io.mmread(fh)
    except (ValueError, IndexError, OSError) as exc:
        if isinstance(exc, FileNotFoundError):
            raise
        raise ParseError(f"{path}: {exc}") from exc
    if not sp.issparse(mat):
        raise ParseError(f"{path}: only the coordinate format is supported")
    info = scipy.io.mminfo(str(path))
    symmetry = info[5]
    nrows, ncols = mat.shape
    if nrows != ncols:
        raise ParseError(f"{path}: adjacency matrix must be square, got {nrows}x{ncols}")
    if np.iscomplexobj(mat.data):
        raise ParseError(f"{path}: complex matrices are not supported")

    coo = mat.tocoo()
    rows = coo.row.astype(np.int64)
    cols = coo.col.astype(np.int64)
    data = coo.data.astype(np.float64)

    diag = rows == cols
    if np.any(diag):
        k = int(np.flatnonzero(diag)[0])
        raise SelfLoopError(f"{path}: diagonal entry at node {int(rows[k]) + 1}")

    n = nrows
    if symmetry == "general":
        a = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
        at = a.T.tocsr()
        if ((a != 0) != (at != 0)).nnz:
            raise AsymmetryError(f"{path}: general matrix pattern is not symmetric")
        if (a != at).nnz:
            raise AsymmetryError(f"{path}: general matrix values are not symmetric")
    # Symmetric files come back mirrored by mmread and general ones were just
    # checked, so the strict lower triangle holds every edge once.
    keep = rows > cols
    rows, cols, data = rows[keep], cols[keep], data[keep]

    keys = rows * n + cols
    uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
    if uniq.size != keys.size:
        warnings.warn(
            f"{path}: {int(np.sum(counts > 1))} duplicate entries summed into single edges",
            stacklevel=2,
        )
        summed = np.zeros(uniq.size)
        np.add.at(summed, inverse, data)
        rows, cols, data = uniq // n, uniq % n, summed
    else:
        order = np.argsort(keys, kind="stable")
        rows, cols, data = rows[order], cols[order], data[order]

    if info[4] == "pattern":
        data = np.ones_like(data)
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise ParseError(f"{path}: edge weights must be finite and strictly positive")

    coords = load_coords(coords_path, n) if coords_path is not None else None
    return WeightedGraph(n, cols, rows, data, coords)


def build_laplacian(g: WeightedGraph) -> LaplacianOperator:
    """Assemble L with L_ij = w_ij off the diagonal and L_ii = -Σ_j w_ij.

    The diagonal is the negated off-diagonal row sum, so constants lie in the
    kernel up to the rounding of that one sum.
    """
    n = g.node_count
    rows = np.concatenate([g.u, g.v])
    cols = np.concatenate([g.v, g.u])
    vals = np.concatenate([g.w, g.w])
    off = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    off.sort_indices()
    degree = np.asarray(off.sum(axis=1)).ravel()
    mat = (off - sp.diags(degree, format="csr")).tocsr()
    mat.eliminate_zeros()
    mat.sort_indices()
    return LaplacianOperator(mat)


def apply_laplacian(L: LaplacianOperator, f) -> np.ndarray:
    """Return Δf; ``f`` may be a vector or an ``(n, k)`` block of vectors."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != L.n:
        raise DimensionMismatch(f"expected leading dimension {L.n}, got {f.shape[0]}")
    return L.matrix @ f


def check_connected(g) -> bool:
    """Breadth-first reachability of every node from node 0.

    Accepts either a :class:`WeightedGraph` or a :class:`LaplacianOperator`.
    """
    if isinstance(g, LaplacianOperator):
        adj = g.matrix
        n = g.n
    else:
        adj = g.adjacency()
        n = g.node_count
    if n == 1:
        return True
    order = breadth_first_order(adj, 0, directed=False, return_predecessors=False)
    return order.size == n


def dirichlet_form(L: LaplacianOperator, f, g) -> float:
    """½ Σ_{x,y} w(x,y) [f(y)-f(x)][g(y)-g(x)], summed edge by edge."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != (L.n,) or g.shape != (L.n,):
        raise DimensionMismatch(f"vectors must have length {L.n}")
    i, j, w = L.edge_arrays()
    # Each unordered edge appears twice in the ordered double sum, cancelling the ½.
    return float(np.sum(w * (f[j] - f[i]) * (g[j] - g[i])))


def green_identity_residual(L: LaplacianOperator, f, g) -> float:
    """|Σ f·Δg + ½ Σ w (Δ_e f)(Δ_e g)|, which vanishes in exact arithmetic."""
    f = np.asarray(f, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if f.shape != (L.n,) or g.shape != (L.n,):
        raise DimensionMismatch(f"vectors must have length {L.n}")
    lhs = float(f @ apply_laplacian(L, g))
    return abs(lhs + dirichlet_form(L, f, g))


def reciprocal_identity_residual(L: LaplacianOperator, g) -> float:
    """Residual of Σ Δg / g = ½ Σ w (g(y)-g(x))² / (g(x) g(y)) for positive g."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape != (L.n,):
        raise DimensionMismatch(f"vector must have length {L.n}")
    if np.any(g <= 0):
        raise ValueError("g must be strictly positive")
    lhs = float(np.sum(apply_laplacian(L, g) / g))
    i, j, w = L.edge_arrays()
    rhs = float(np.sum(w * (g[j] - g[i]) ** 2 / (g[i] * g[j])))
    return abs(lhs - rhs)
