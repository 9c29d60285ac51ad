"""Synthetic graphs with planted, possibly overlapping communities.

A simplified take on the classic overlapping-community benchmark family:
uniform community sizes, truncated-power-law degrees (exponent 2.5), and
configuration-model stub matching that sends a (1 - mixing) fraction of
each node's edges inside its own communities. Features are noisy community
indicators padded with pure-noise columns, so structure and attributes
carry the same planted signal.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputDataError
from .graphs import LabelSet, SparseGraph

log = logging.getLogger(__name__)

__all__ = ["SynthConfig", "generate"]

DEGREE_EXPONENT = 2.5
MATCH_ROUNDS = 30
ASSIGN_RETRIES = 100


@dataclass(frozen=True)
class SynthConfig:
    n: int = 1000
    num_communities: int = 8
    avg_degree: float = 20.0
    max_degree: int = 50
    mixing: float = 0.2
    min_community: int = 150
    max_community: int = 300
    overlap_nodes: int = 800
    memberships: int = 2
    feature_dim: int = 16
    noise: float = 0.35
    seed: int = 0

    def __post_init__(self):
        if self.min_community > self.max_community:
            raise InputDataError("min_community exceeds max_community")
        if self.overlap_nodes > self.n:
            raise InputDataError("more overlap nodes than nodes")
        if self.memberships < 1:
            raise InputDataError("memberships must be >= 1")
        if self.memberships > self.num_communities:
            raise InputDataError("memberships exceed community count")
        if not 0.0 <= self.mixing <= 1.0:
            raise InputDataError("mixing must lie in [0, 1]")
        if self.feature_dim < self.num_communities:
            raise InputDataError("feature_dim must cover the indicator block")
        total = self.n + self.overlap_nodes * (self.memberships - 1)
        if not (self.num_communities * self.min_community <= total
                <= self.num_communities * self.max_community):
            raise InputDataError(
                f"{total} memberships cannot fill {self.num_communities} "
                f"communities sized [{self.min_community}, {self.max_community}]")


def _truncated_powerlaw_mean(a: float, b: float, gamma: float = DEGREE_EXPONENT) -> float:
    num = (b ** (2.0 - gamma) - a ** (2.0 - gamma)) / (2.0 - gamma)
    den = (b ** (1.0 - gamma) - a ** (1.0 - gamma)) / (1.0 - gamma)
    return num / den


def _sample_degrees(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Degrees from a truncated power law whose lower cutoff is tuned so the
    mean hits avg_degree; the sum is then nudged onto the exact target."""
    b = float(cfg.max_degree)
    if cfg.avg_degree >= b:
        raise InputDataError("avg_degree must be below max_degree")
    lo, hi = 1.0, b
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _truncated_powerlaw_mean(mid, b) < cfg.avg_degree:
            lo = mid
        else:
            hi = mid
    a = 0.5 * (lo + hi)
    u = rng.random(cfg.n)
    g1 = 1.0 - DEGREE_EXPONENT
    raw = (a ** g1 - u * (a ** g1 - b ** g1)) ** (1.0 / g1)
    degrees = np.clip(np.rint(raw).astype(int), 1, cfg.max_degree)

    target = int(round(cfg.n * cfg.avg_degree))
    floor = max(1, int(np.floor(a)))
    for _ in range(10 * cfg.n):
        diff = int(degrees.sum()) - target
        if diff == 0:
            break
        i = int(rng.integers(cfg.n))
        if diff > 0 and degrees[i] > floor:
            degrees[i] -= 1
        elif diff < 0 and degrees[i] < cfg.max_degree:
            degrees[i] += 1
    if degrees.sum() % 2 == 1:
        i = int(np.argmin(degrees))
        degrees[i] += 1
    return degrees


def _community_sizes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    total = cfg.n + cfg.overlap_nodes * (cfg.memberships - 1)
    sizes = rng.integers(cfg.min_community, cfg.max_community + 1,
                         size=cfg.num_communities)
    for _ in range(10 * total):
        diff = int(sizes.sum()) - total
        if diff == 0:
            return sizes
        i = int(rng.integers(cfg.num_communities))
        if diff > 0 and sizes[i] > cfg.min_community:
            sizes[i] -= 1
        elif diff < 0 and sizes[i] < cfg.max_community:
            sizes[i] += 1
    raise InputDataError("could not balance community sizes")


def _assign_memberships(cfg: SynthConfig, sizes: np.ndarray,
                        rng: np.random.Generator) -> list[tuple[int, ...]]:
    """Give every node its community set: ``memberships`` distinct ones for
    overlap nodes, one for the rest, respecting community capacities."""
    overlap = set(rng.choice(cfg.n, size=cfg.overlap_nodes, replace=False).tolist())
    for _ in range(ASSIGN_RETRIES):
        caps = sizes.astype(float).copy()
        members: dict[int, tuple[int, ...]] = {}
        ok = True
        order = [v for v in rng.permutation(cfg.n).tolist() if v in overlap] + \
                [v for v in rng.permutation(cfg.n).tolist() if v not in overlap]
        for v in order:
            want = cfg.memberships if v in overlap else 1
            if (caps > 0).sum() < want:
                ok = False
                break
            chosen = rng.choice(cfg.num_communities, size=want, replace=False,
                                p=caps / caps.sum())
            caps[chosen] -= 1
            if caps.min() < 0:
                ok = False
                break
            members[v] = tuple(sorted(int(c) for c in chosen))
        if ok:
            return [members[v] for v in range(cfg.n)]
    raise InputDataError("membership assignment failed after bounded retries")


def _match_stubs(stubs: list[int], rng: np.random.Generator,
                 existing: set[tuple[int, int]],
                 conflict=None) -> list[tuple[int, int]]:
    """Pair stubs into simple edges; unpaired stubs after bounded reshuffle
    rounds are dropped (a small distortion of the degree sequence)."""
    edges: list[tuple[int, int]] = []
    pool = list(stubs)
    for _ in range(MATCH_ROUNDS):
        if len(pool) < 2:
            break
        rng.shuffle(pool)
        leftovers: list[int] = []
        if len(pool) % 2 == 1:
            leftovers.append(pool.pop())
        for u, v in zip(pool[0::2], pool[1::2]):
            key = (min(u, v), max(u, v))
            if u == v or key in existing or (conflict and conflict(u, v)):
                leftovers.extend((u, v))
                continue
            existing.add(key)
            edges.append(key)
        pool = leftovers
    if pool:
        log.debug("dropped %d unmatched stubs", len(pool))
    return edges


def generate(cfg: SynthConfig) -> tuple[SparseGraph, np.ndarray, LabelSet]:
    """Build the graph, its features, and per-node community label sets."""
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    sizes = _community_sizes(cfg, rng)
    members = _assign_memberships(cfg, sizes, rng)
    degrees = _sample_degrees(cfg, rng)

    # split each node's degree into per-community intra stubs and inter stubs
    intra_alloc: list[dict[int, int]] = []
    inter_budget = np.zeros(cfg.n, dtype=int)
    for v in range(cfg.n):
        coms = members[v]
        d_intra = int(round((1.0 - cfg.mixing) * degrees[v]))
        base, extra = divmod(d_intra, len(coms))
        alloc = {c: base for c in coms}
        for c in rng.permutation(list(coms))[:extra].tolist():
            alloc[int(c)] += 1
        intra_alloc.append(alloc)
        inter_budget[v] = degrees[v] - d_intra

    existing: set[tuple[int, int]] = set()
    all_edges: list[tuple[int, int]] = []
    for c in range(cfg.num_communities):
        stubs = [v for v in range(cfg.n) for _ in range(intra_alloc[v].get(c, 0))]
        all_edges.extend(_match_stubs(stubs, rng, existing))

    member_sets = [set(m) for m in members]
    inter_stubs = [v for v in range(cfg.n) for _ in range(inter_budget[v])]
    all_edges.extend(_match_stubs(
        inter_stubs, rng, existing,
        conflict=lambda u, v: bool(member_sets[u] & member_sets[v])))

    graph = SparseGraph.from_edges(cfg.n, {e: 1.0 for e in all_edges})

    indicator = np.zeros((cfg.n, cfg.num_communities))
    for v, coms in enumerate(members):
        indicator[v, list(coms)] = 1.0
    noise = cfg.noise * rng.standard_normal((cfg.n, cfg.feature_dim))
    features = noise
    features[:, :cfg.num_communities] += indicator

    labels = LabelSet(tuple(members), cfg.num_communities)
    return graph, features, labels
