"""Core graph and feature data model.

Graphs are undirected, stored in canonical CSR form (rows sorted by column,
no duplicates, symmetric for every loader in this module). All structures
are immutable after construction and safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import scipy.sparse as sp

from .errors import InputDataError

__all__ = [
    "SparseGraph",
    "LabelSet",
    "load_edge_list",
    "load_directed_edge_list",
    "load_features",
    "load_labels",
    "sym_normalized_adjacency",
]


@dataclass(frozen=True)
class SparseGraph:
    """CSR adjacency matrix of an n-node graph.

    ``values[row_ptr[u]:row_ptr[u+1]]`` are the weights of u's outgoing
    entries, with matching columns in ``col_idx``. Binary graphs store 1.0.
    The matrix need not be symmetric (row-wise top-k selection produces
    asymmetric ones); loaders always return symmetric graphs.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", np.asarray(self.row_ptr, dtype=np.int64))
        object.__setattr__(self, "col_idx", np.asarray(self.col_idx, dtype=np.int64))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        self.row_ptr.setflags(write=False)
        self.col_idx.setflags(write=False)
        self.values.setflags(write=False)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.shape[0])

    @staticmethod
    def from_scipy(mat: sp.spmatrix) -> "SparseGraph":
        csr = sp.csr_matrix(mat)
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        if csr.shape[0] != csr.shape[1]:
            raise InputDataError(f"adjacency must be square, got {csr.shape}")
        return SparseGraph(
            n=csr.shape[0],
            row_ptr=csr.indptr.astype(np.int64),
            col_idx=csr.indices.astype(np.int64),
            values=csr.data.astype(np.float64),
        )

    @staticmethod
    def from_edges(n: int, edges: dict[tuple[int, int], float]) -> "SparseGraph":
        """Build a symmetric graph from undirected edges keyed (u, v), u < v."""
        if not edges:
            return SparseGraph.empty(n)
        src, dst, w = [], [], []
        for (u, v), weight in edges.items():
            src.extend((u, v))
            dst.extend((v, u))
            w.extend((weight, weight))
        coo = sp.coo_matrix((w, (src, dst)), shape=(n, n))
        return SparseGraph.from_scipy(coo)

    @staticmethod
    def empty(n: int) -> "SparseGraph":
        return SparseGraph(n, np.zeros(n + 1, dtype=np.int64),
                           np.zeros(0, dtype=np.int64), np.zeros(0))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_idx, self.row_ptr),
                             shape=(self.n, self.n))

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def row(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """Columns and values of row ``u``."""
        lo, hi = self.row_ptr[u], self.row_ptr[u + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def get(self, u: int, v: int) -> float:
        """Entry (u, v); absent entries read as 0.0."""
        cols, vals = self.row(u)
        pos = np.searchsorted(cols, v)
        if pos < cols.shape[0] and cols[pos] == v:
            return float(vals[pos])
        return 0.0

    def neighbor_sets(self) -> list[set[int]]:
        """Per-node neighbor sets; convenient for combinatorial algorithms."""
        return [set(self.row(u)[0].tolist()) for u in range(self.n)]

    def degrees(self) -> np.ndarray:
        """Weighted row degrees (sum of row values)."""
        return np.asarray(self.to_scipy().sum(axis=1)).ravel()

    def is_symmetric(self, tol: float = 0.0) -> bool:
        m = self.to_scipy()
        diff = (m - m.T).tocoo()
        if diff.nnz == 0:
            return True
        return bool(np.max(np.abs(diff.data)) <= tol)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        """Iterate stored entries (u, v, w) in row-major order."""
        for u in range(self.n):
            cols, vals = self.row(u)
            for v, w in zip(cols.tolist(), vals.tolist()):
                yield u, v, w

    def write_edge_list(self, path: str | Path, undirected: bool = True) -> None:
        """Write as whitespace edge list; symmetric graphs emit each edge once."""
        with open(path, "w") as fh:
            for u, v, w in self.edges():
                if undirected and v < u:
                    continue
                if w == 1.0:
                    fh.write(f"{u} {v}\n")
                else:
                    fh.write(f"{u} {v} {w!r}\n")


@dataclass(frozen=True)
class LabelSet:
    """Per-node labels; one label per node for real datasets, possibly
    several for synthetic overlapping-community graphs."""

    labels: tuple[tuple[int, ...], ...]
    num_classes: int

    def __post_init__(self):
        for i, row in enumerate(self.labels):
            for lab in row:
                if not 0 <= lab < self.num_classes:
                    raise InputDataError(
                        f"label {lab} of node {i} outside [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    def single(self) -> np.ndarray:
        """Labels as a flat int vector; errors unless every node has one label."""
        if any(len(row) != 1 for row in self.labels):
            raise InputDataError("label set is multilabel, expected single-label")
        return np.array([row[0] for row in self.labels], dtype=np.int64)

    def indicator(self) -> np.ndarray:
        """(n, num_classes) binary membership matrix."""
        out = np.zeros((len(self.labels), self.num_classes), dtype=np.float64)
        for i, row in enumerate(self.labels):
            out[i, list(row)] = 1.0
        return out


def load_edge_list(path: str | Path, n: int) -> SparseGraph:
    """Load a whitespace "src dst [weight]" edge list into a symmetric graph.

    Node ids are 0-based. Self-loops are dropped (they are re-added where a
    downstream formula wants them); duplicate edges collapse to one entry.
    """
    edges: dict[tuple[int, int], float] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise InputDataError(f"{path}:{lineno}: expected 'src dst [weight]', got {line!r}")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise InputDataError(f"{path}:{lineno}: {exc}") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise InputDataError(f"{path}:{lineno}: node id outside [0, {n})")
            if u == v:
                continue
            edges[(min(u, v), max(u, v))] = w
    return SparseGraph.from_edges(n, edges)


def load_directed_edge_list(path: str | Path, n: int) -> SparseGraph:
    """Load stored entries exactly as written, without symmetrization.

    Round-trips the asymmetric matrices this package writes (semantic
    graphs); self-loops and duplicates are rejected.
    """
    entries: dict[tuple[int, int], float] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise InputDataError(f"{path}:{lineno}: expected 'src dst [weight]'")
            try:
                u, v = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError as exc:
                raise InputDataError(f"{path}:{lineno}: {exc}") from exc
            if not (0 <= u < n and 0 <= v < n):
                raise InputDataError(f"{path}:{lineno}: node id outside [0, {n})")
            if u == v:
                raise InputDataError(f"{path}:{lineno}: unexpected self-loop")
            if (u, v) in entries:
                raise InputDataError(f"{path}:{lineno}: duplicate entry ({u}, {v})")
            entries[(u, v)] = w
    if not entries:
        return SparseGraph.empty(n)
    src = np.array([e[0] for e in entries], dtype=np.int64)
    dst = np.array([e[1] for e in entries], dtype=np.int64)
    vals = np.array(list(entries.values()))
    return SparseGraph.from_scipy(sp.csr_matrix((vals, (src, dst)), shape=(n, n)))


def load_features(path: str | Path) -> np.ndarray:
    """Load a dense feature matrix from CSV (n rows, fixed column count)."""
    rows: list[list[float]] = []
    width = None
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise InputDataError(
                    f"{path}:{lineno}: ragged row ({len(cells)} columns, expected {width})")
            try:
                rows.append([float(c) for c in cells])
            except ValueError as exc:
                raise InputDataError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
    if not rows:
        raise InputDataError(f"{path}: empty feature file")
    x = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise InputDataError(f"{path}: features contain NaN/inf")
    return x


def load_labels(path: str | Path, num_classes: int | None = None) -> LabelSet:
    """Load per-node labels from CSV; each line lists that node's labels."""
    labels: list[tuple[int, ...]] = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = tuple(sorted(int(c) for c in line.split(",")))
            except ValueError as exc:
                raise InputDataError(f"{path}:{lineno}: non-integer label ({exc})") from exc
            if not row:
                raise InputDataError(f"{path}:{lineno}: node has no labels")
            labels.append(row)
    if not labels:
        raise InputDataError(f"{path}: empty label file")
    if num_classes is None:
        num_classes = 1 + max(max(row) for row in labels)
    return LabelSet(tuple(labels), num_classes)


def sym_normalized_adjacency(g: SparseGraph, add_self_loops: bool = False) -> SparseGraph:
    """Symmetric degree normalization D^{-1/2} (A [+ I]) D^{-1/2}.

    Degrees are taken from the (optionally self-looped) matrix. Zero-degree
    rows normalize to zero (0/0 := 0), so with self-loops an isolated node
    keeps a lone diagonal 1.0.
    """
    mat = g.to_scipy()
    if add_self_loops:
        mat = mat + sp.identity(g.n, format="csr")
    deg = np.asarray(mat.sum(axis=1)).ravel()
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = 1.0 / np.sqrt(deg[pos])
    d = sp.diags(inv_sqrt)
    return SparseGraph.from_scipy(d @ mat @ d)
