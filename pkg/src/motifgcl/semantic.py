"""Semantic graphs: feature cosine similarity restricted to motif support.

For each motif, pairs that co-occur in at least one instance are scored by
feature cosine and each node keeps its top-k scoring partners. The result
is one sparse, row-wise-truncated graph per motif.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputDataError
from .graphs import SparseGraph
from .motifs import MotifPattern, cooccurrence, enumerate_instances, nonzero_mask

log = logging.getLogger(__name__)

__all__ = [
    "SemanticGraphSet",
    "masked_cosine",
    "topk_rows",
    "build_semantic_graphs",
    "dense_topk_cosine",
]


@dataclass(frozen=True)
class SemanticGraphSet:
    """The per-motif semantic graphs produced by preprocessing."""

    graphs: tuple[SparseGraph, ...]
    k: int
    motif_names: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.graphs)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    safe = np.where(norms > 0, norms, 1.0)
    return x / safe  # zero rows stay zero -> cosine 0 by convention


def masked_cosine(x: np.ndarray, mask: SparseGraph) -> SparseGraph:
    """Cosine similarity evaluated only on the stored entries of ``mask``.

    Never densifies: per masked pair (u, v) the value is cos(x_u, x_v).
    Zero-norm feature rows score 0 against everything; exact-zero cosines
    are not stored (indistinguishable from absent entries downstream).
    """
    if mask.n != x.shape[0]:
        raise InputDataError(
            f"mask has {mask.n} nodes but features have {x.shape[0]} rows")
    if mask.nnz == 0:
        return SparseGraph.empty(mask.n)
    xn = _unit_rows(np.asarray(x, dtype=np.float64))
    rows = np.repeat(np.arange(mask.n), np.diff(mask.row_ptr))
    cols = mask.col_idx
    vals = np.einsum("ij,ij->i", xn[rows], xn[cols])
    keep = vals != 0.0
    out = sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(mask.n, mask.n))
    return SparseGraph.from_scipy(out)


def topk_rows(m: SparseGraph, k: int) -> SparseGraph:
    """Keep the k largest stored values of every row (all when fewer exist).

    Ties at the cutoff keep the smaller column id. Values are preserved and
    the result is NOT symmetrized: selection is strictly per row.
    """
    if k < 1:
        raise InputDataError(f"top-k needs k >= 1, got {k}")
    keep_rows, keep_cols, keep_vals = [], [], []
    for u in range(m.n):
        lo, hi = m.row_ptr[u], m.row_ptr[u + 1]
        cols = m.col_idx[lo:hi]
        vals = m.values[lo:hi]
        if cols.shape[0] > k:
            # sort by (-value, column id): deterministic cutoff ties
            sel = np.lexsort((cols, -vals))[:k]
            cols, vals = cols[sel], vals[sel]
        keep_rows.append(np.full(cols.shape[0], u, dtype=np.int64))
        keep_cols.append(cols)
        keep_vals.append(vals)
    out = sp.csr_matrix(
        (np.concatenate(keep_vals), (np.concatenate(keep_rows), np.concatenate(keep_cols))),
        shape=(m.n, m.n),
    )
    return SparseGraph.from_scipy(out)


def build_semantic_graphs(
    g: SparseGraph,
    x: np.ndarray,
    patterns: list[MotifPattern],
    k: int,
) -> SemanticGraphSet:
    """Full per-motif pipeline: enumerate instances, count co-occurrences,
    mask feature cosine to their support, truncate rows to top-k."""
    if not patterns:
        raise InputDataError("need at least one motif pattern")
    graphs = []
    for pattern in patterns:
        inst = enumerate_instances(g, pattern)
        if len(inst) == 0:
            log.warning("motif %r has no instances; semantic graph is empty", pattern.name)
            graphs.append(SparseGraph.empty(g.n))
            continue
        mask = nonzero_mask(cooccurrence(inst, g))
        graphs.append(topk_rows(masked_cosine(x, mask), k))
    return SemanticGraphSet(tuple(graphs), k, tuple(p.name for p in patterns))


def dense_topk_cosine(x: np.ndarray, k: int) -> SparseGraph:
    """Top-k of the full cosine similarity matrix, diagonal excluded.

    Used by the ablation that drops the motif mask and keeps only feature
    similarity. Densifies (n x n); intended for desk-scale runs.
    """
    xn = _unit_rows(np.asarray(x, dtype=np.float64))
    sims = xn @ xn.T
    np.fill_diagonal(sims, 0.0)
    n = sims.shape[0]
    mask = sims != 0.0
    rows, cols = np.nonzero(mask)
    full = sp.csr_matrix((sims[rows, cols], (rows, cols)), shape=(n, n))
    return topk_rows(SparseGraph.from_scipy(full), k)
