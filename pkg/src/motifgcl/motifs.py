"""Motif instance enumeration and co-occurrence counting.

A motif is a small connected template graph; an instance is a vertex set of
the host graph that admits a bijection onto the template mapping every
template edge to a host edge (non-induced: extra host edges are allowed).
Each vertex set counts once no matter how many bijections realize it.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InputDataError
from .graphs import SparseGraph

log = logging.getLogger(__name__)

__all__ = [
    "MotifPattern",
    "InstanceSet",
    "BUILTIN_MOTIFS",
    "enumerate_instances",
    "cooccurrence",
    "nonzero_mask",
]


@dataclass(frozen=True)
class MotifPattern:
    """A template graph: ``size`` nodes labelled 0..size-1 plus its edges."""

    name: str
    size: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.size < 2:
            raise InputDataError(f"motif {self.name!r}: needs at least 2 nodes")
        seen = set()
        for u, v in self.edges:
            if u == v:
                raise InputDataError(f"motif {self.name!r}: self-loop on node {u}")
            if not (0 <= u < self.size and 0 <= v < self.size):
                raise InputDataError(f"motif {self.name!r}: edge ({u},{v}) out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise InputDataError(f"motif {self.name!r}: duplicate edge {key}")
            seen.add(key)
        object.__setattr__(self, "edges", tuple(sorted(seen)))
        if not self._connected():
            raise InputDataError(f"motif {self.name!r}: pattern must be connected")

    def _connected(self) -> bool:
        adj = self.adjacency()
        todo, seen = [0], {0}
        while todo:
            u = todo.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == self.size

    def adjacency(self) -> list[set[int]]:
        adj: list[set[int]] = [set() for _ in range(self.size)]
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def degrees(self) -> list[int]:
        return [len(a) for a in self.adjacency()]


BUILTIN_MOTIFS: dict[str, MotifPattern] = {
    "triangle": MotifPattern("triangle", 3, ((0, 1), (1, 2), (0, 2))),
    "4-clique": MotifPattern(
        "4-clique", 4, ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))),
    "4-cycle": MotifPattern("4-cycle", 4, ((0, 1), (1, 2), (2, 3), (0, 3))),
}


@dataclass(frozen=True)
class InstanceSet:
    """All matched instances of one motif in a host graph.

    ``instances[i]`` is a sorted node tuple (the matched vertex set) and
    ``matched_edges[i]`` the host edges realized by template edges under at
    least one bijection for that vertex set, as sorted (u, v) pairs, u < v.
    """

    motif: MotifPattern
    instances: tuple[tuple[int, ...], ...]
    matched_edges: tuple[tuple[tuple[int, int], ...], ...]

    def __len__(self) -> int:
        return len(self.instances)


def _search_order(pattern: MotifPattern) -> list[int]:
    """Template-node visit order: highest degree first, then keep the
    frontier connected so every placement can be candidate-pruned."""
    adj = pattern.adjacency()
    deg = pattern.degrees()
    order = [max(range(pattern.size), key=lambda u: (deg[u], -u))]
    placed = set(order)
    while len(order) < pattern.size:
        frontier = [u for u in range(pattern.size)
                    if u not in placed and adj[u] & placed]
        nxt = max(frontier, key=lambda u: (len(adj[u] & placed), deg[u], -u))
        order.append(nxt)
        placed.add(nxt)
    return order


def enumerate_instances(g: SparseGraph, pattern: MotifPattern) -> InstanceSet:
    """Enumerate every vertex set of ``g`` matching ``pattern``.

    Backtracking over template nodes in a connectivity-preserving order;
    candidates for each placement are intersections of already-mapped
    neighbors' adjacency sets, pruned by degree. Distinct bijections onto
    the same vertex set are merged, unioning their realized edge sets, so
    results are independent of traversal order.
    """
    m = pattern.size
    if m > g.n:
        return InstanceSet(pattern, (), ())
    nbrs = g.neighbor_sets()
    host_deg = [len(s) for s in nbrs]
    order = _search_order(pattern)
    adj = pattern.adjacency()
    pat_deg = pattern.degrees()
    # template neighbors of order[t] already placed at step t
    placed_nbrs = []
    for t, u in enumerate(order):
        earlier = set(order[:t])
        placed_nbrs.append([order.index(v) for v in adj[u] & earlier])

    found: dict[tuple[int, ...], set[tuple[int, int]]] = {}
    assignment = [0] * m  # host node for order[t]

    def realized_edges() -> list[tuple[int, int]]:
        pos = {order[t]: assignment[t] for t in range(m)}
        out = []
        for a, b in pattern.edges:
            u, v = pos[a], pos[b]
            out.append((u, v) if u < v else (v, u))
        return out

    def extend(t: int) -> None:
        if t == m:
            key = tuple(sorted(assignment))
            found.setdefault(key, set()).update(realized_edges())
            return
        u = order[t]
        back = placed_nbrs[t]
        cands = nbrs[assignment[back[0]]]
        for j in back[1:]:
            cands = cands & nbrs[assignment[j]]
        used = assignment[:t]
        for host in cands:
            if host_deg[host] < pat_deg[u] or host in used:
                continue
            assignment[t] = host
            extend(t + 1)

    root = order[0]
    for v in range(g.n):
        if host_deg[v] < pat_deg[root]:
            continue
        assignment[0] = v
        extend(1)

    keys = sorted(found)
    return InstanceSet(
        pattern,
        tuple(keys),
        tuple(tuple(sorted(found[k])) for k in keys),
    )


def cooccurrence(instances: InstanceSet, g: SparseGraph) -> SparseGraph:
    """Co-occurrence counts: entry (u, v) is the number of instances whose
    matched edge set contains the pair. Symmetric, integer-valued."""
    if not instances.instances:
        return SparseGraph.empty(g.n)
    src, dst = [], []
    for edge_set in instances.matched_edges:
        for u, v in edge_set:
            src.append(u)
            dst.append(v)
    row = np.array(src + dst, dtype=np.int64)
    col = np.array(dst + src, dtype=np.int64)
    data = np.ones(row.shape[0], dtype=np.float64)
    counts = sp.coo_matrix((data, (row, col)), shape=(g.n, g.n))
    return SparseGraph.from_scipy(counts)  # coo->csr sums duplicates


def nonzero_mask(counts: SparseGraph) -> SparseGraph:
    """Binary support matrix of a count matrix."""
    mask = counts.to_scipy().copy()
    mask.data = np.ones_like(mask.data)
    return SparseGraph.from_scipy(mask)
