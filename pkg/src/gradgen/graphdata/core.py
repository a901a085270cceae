"""Graph value type, lower-triangular encoding, size distribution, splits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Graph",
    "OrderedLower",
    "SizeDistribution",
    "DatasetSplit",
    "to_lower",
    "reconstruct",
    "size_dist",
    "sample_size",
    "split",
]


class Graph:
    """Undirected simple graph: ``n`` nodes, edges as (u, v) pairs with u < v."""

    __slots__ = ("n", "edges")

    def __init__(self, n: int, edges):
        if n < 1:
            raise ValueError("graph needs at least one node")
        norm = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop on node {u}")
            if u > v:
                u, v = v, u
            if not (0 <= u < v < n):
                raise ValueError(f"edge ({u}, {v}) out of range for {n} nodes")
            if (u, v) in norm:
                raise ValueError(f"duplicate edge ({u}, {v})")
            norm.add((u, v))
        self.n = n
        self.edges = frozenset(norm)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"Graph(n={self.n}, m={len(self.edges)})"

    def num_edges(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=bool)
        for u, v in self.edges:
            a[u, v] = a[v, u] = True
        return a

    def neighbor_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        return adj

    def degrees(self) -> np.ndarray:
        d = np.zeros(self.n, dtype=np.int64)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d


@dataclass
class OrderedLower:
    """A node permutation plus the lower-triangular rows it induces.

    ``perm[k]`` is the source node placed at position ``k``; ``rows[i]`` holds
    the earlier-position neighbors of position ``i`` (all indices < i).
    """

    perm: list[int]
    rows: list[np.ndarray]

    @property
    def n(self) -> int:
        return len(self.rows)


def to_lower(g: Graph, perm) -> OrderedLower:
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(g.n)):
        raise ValueError("perm is not a bijection over the graph's nodes")
    pos = {node: i for i, node in enumerate(perm)}
    rows: list[list[int]] = [[] for _ in range(g.n)]
    for u, v in g.edges:
        i, j = pos[u], pos[v]
        if i < j:
            i, j = j, i
        rows[i].append(j)
    return OrderedLower(perm=perm, rows=[np.array(sorted(r), dtype=np.int64) for r in rows])


def reconstruct(ol: OrderedLower) -> Graph:
    edges = []
    for i, row in enumerate(ol.rows):
        for j in row:
            if j >= i:
                raise ValueError(f"row {i} references non-earlier node {j}")
            edges.append((int(j), i))
    return Graph(ol.n, edges)


@dataclass
class SizeDistribution:
    """Empirical node-count distribution of a training set."""

    counts: np.ndarray  # distinct node counts, ascending
    weights: np.ndarray  # empirical probabilities, same length

    def sample(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.counts, p=self.weights))


def size_dist(train: list[Graph]) -> SizeDistribution:
    if not train:
        raise ValueError("empty training set")
    sizes = np.array(sorted(g.n for g in train), dtype=np.int64)
    counts, freq = np.unique(sizes, return_counts=True)
    return SizeDistribution(counts=counts, weights=freq / freq.sum())


def sample_size(dist: SizeDistribution, rng: np.random.Generator) -> int:
    return dist.sample(rng)


@dataclass
class DatasetSplit:
    train: list[Graph]
    test: list[Graph]
    seed: int = 0

    def __iter__(self):
        yield self.train
        yield self.test


def split(dataset: list[Graph], seed: int) -> DatasetSplit:
    """Seeded random 80/20 split; train gets ``floor(0.8 * total)`` graphs."""
    rng = np.random.default_rng([int(seed), 0x5B17])
    order = rng.permutation(len(dataset))
    cut = int(0.8 * len(dataset))
    train = [dataset[i] for i in order[:cut]]
    test = [dataset[i] for i in order[cut:]]
    return DatasetSplit(train=train, test=test, seed=int(seed))
