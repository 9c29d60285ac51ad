"""Dual graph views: original adjacency vs. personalized-PageRank diffusion,
with independent feature dropout per view.

Structures are built once; feature dropout is re-sampled every training step
through a counter-based RNG keyed by (seed, step, view), so runs reproduce
exactly regardless of how steps are scheduled.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputDataError
from .graphs import SparseGraph, sym_normalized_adjacency
from .semantic import SemanticGraphSet

__all__ = [
    "GraphView",
    "ppr_diffusion",
    "feature_dropout",
    "edge_dropout",
    "step_rng",
    "build_views",
    "view_structures",
]

Structure = SparseGraph | np.ndarray

DENSE_SOLVE_LIMIT = 5000
SERIES_TOL = 1e-6
SPARSIFY_THRESHOLD = 1e-4


@dataclass(frozen=True)
class GraphView:
    """One augmented view: perturbed features plus its structure list
    (index 0 the holistic matrix, the rest the shared semantic graphs)."""

    features: np.ndarray
    structures: tuple[Structure, ...]

    def __post_init__(self):
        n = self.features.shape[0]
        for s in self.structures:
            sn = s.n if isinstance(s, SparseGraph) else s.shape[0]
            if sn != n:
                raise InputDataError(f"structure has {sn} nodes, features have {n}")


def ppr_diffusion(
    g: SparseGraph,
    alpha: float,
    dense_solve_limit: int = DENSE_SOLVE_LIMIT,
    sparsify_threshold: float = SPARSIFY_THRESHOLD,
) -> Structure:
    """Personalized-PageRank diffusion alpha * (I - (1-alpha) A_hat)^-1
    with A_hat the symmetrically normalized adjacency (no self-loops).

    Small graphs (n <= dense_solve_limit) use a direct linear solve and
    return a dense symmetric matrix. Larger graphs use the truncated
    geometric series (enough terms that the tail weight is < 1e-6) and are
    sparsified by dropping entries <= sparsify_threshold.
    """
    if not 0.0 < alpha < 1.0:
        raise InputDataError(f"teleport probability must lie in (0, 1), got {alpha}")
    a_hat = sym_normalized_adjacency(g, add_self_loops=False).to_scipy()
    if g.n <= dense_solve_limit:
        lhs = np.eye(g.n) - (1.0 - alpha) * a_hat.toarray()
        u = alpha * np.linalg.solve(lhs, np.eye(g.n))
        return 0.5 * (u + u.T)  # solve noise; the exact matrix is symmetric
    # geometric series sum_t alpha (1-alpha)^t A_hat^t, truncated once the
    # tail weight (1-alpha)^(T+1) drops strictly below SERIES_TOL
    last = int(np.floor(np.log(SERIES_TOL) / np.log(1.0 - alpha)))
    u = np.zeros((g.n, g.n))
    power = np.eye(g.n)
    coeff = alpha
    for _ in range(last + 1):
        u += coeff * power
        power = a_hat @ power
        coeff *= 1.0 - alpha
    u = 0.5 * (u + u.T)
    u[np.abs(u) <= sparsify_threshold] = 0.0
    return SparseGraph.from_scipy(sp.csr_matrix(u))


def step_rng(seed: int, step: int, view: int) -> np.random.Generator:
    """Counter-based generator for (seed, step, view); order-independent."""
    key = np.array([np.uint64(seed), np.uint64(2 * step + view)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def feature_dropout(
    x: np.ndarray,
    rate: float,
    rng: int | np.random.Generator,
) -> np.ndarray:
    """Zero each element independently with probability ``rate``; no rescale."""
    if not 0.0 <= rate < 1.0:
        raise InputDataError(f"drop rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return x.copy()
    if isinstance(rng, (int, np.integer)):
        rng = np.random.Generator(np.random.Philox(key=np.uint64(rng)))
    keep = rng.random(x.shape) >= rate
    return x * keep


def edge_dropout(g: SparseGraph, rate: float, rng: np.random.Generator) -> SparseGraph:
    """Drop each stored entry independently with probability ``rate``.

    Off by default everywhere; only the optional semantic-edge perturbation
    uses it, and it intentionally ignores symmetry.
    """
    if not 0.0 <= rate < 1.0:
        raise InputDataError(f"drop rate must lie in [0, 1), got {rate}")
    if rate == 0.0 or g.nnz == 0:
        return g
    keep = rng.random(g.nnz) >= rate
    rows = np.repeat(np.arange(g.n), np.diff(g.row_ptr))
    kept = sp.csr_matrix(
        (g.values[keep], (rows[keep], g.col_idx[keep])), shape=(g.n, g.n))
    return SparseGraph.from_scipy(kept)


def view_structures(
    g: SparseGraph,
    sg: SemanticGraphSet,
    alpha: float,
    dense_solve_limit: int = DENSE_SOLVE_LIMIT,
    sparsify_threshold: float = SPARSIFY_THRESHOLD,
) -> tuple[tuple[Structure, ...], tuple[Structure, ...]]:
    """Fixed structure lists of the two views: [A, semantics...] and
    [diffusion, semantics...]; semantic graphs are shared, not copied."""
    diffusion = ppr_diffusion(g, alpha, dense_solve_limit, sparsify_threshold)
    first = (g,) + tuple(sg.graphs)
    second = (diffusion,) + tuple(sg.graphs)
    return first, second


def build_views(
    g: SparseGraph,
    x: np.ndarray,
    sg: SemanticGraphSet,
    alpha: float,
    rate: float,
    seed: int,
) -> tuple[GraphView, GraphView]:
    """Construct the two training views with independently dropped features
    (sub-streams 0 and 1 of the given seed at step 0)."""
    first, second = view_structures(g, sg, alpha)
    x1 = feature_dropout(x, rate, step_rng(seed, 0, 0))
    x2 = feature_dropout(x, rate, step_rng(seed, 0, 1))
    return GraphView(x1, first), GraphView(x2, second)
