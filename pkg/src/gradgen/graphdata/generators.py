"""Synthetic benchmark families: cycles, 2D grids, lobsters, two-community graphs."""

from __future__ import annotations

import numpy as np

from .core import Graph

__all__ = ["gen_cycles", "gen_grid", "gen_lobster", "gen_community", "make_community", "make_lobster"]


def gen_cycles(seed: int = 0) -> list[Graph]:
    """95 circular graphs, one per node count in [5, 99]."""
    out = []
    for n in range(5, 100):
        edges = [(i, i + 1) for i in range(n - 1)] + [(0, n - 1)]
        out.append(Graph(n, edges))
    return out


def gen_grid(seed: int = 0) -> list[Graph]:
    """All m x n grids with 10 <= m, n <= 20 (121 graphs, 100..400 nodes)."""
    out = []
    for m in range(10, 21):
        for n in range(10, 21):
            edges = []
            for r in range(m):
                for c in range(n):
                    v = r * n + c
                    if c + 1 < n:
                        edges.append((v, v + 1))
                    if r + 1 < m:
                        edges.append((v, v + n))
            out.append(Graph(m * n, edges))
    return out


def make_lobster(expected_backbone: float, p1: float, p2: float, rng: np.random.Generator) -> Graph | None:
    """One lobster draw: a random path, then up to two levels of leaf fuzz.

    Per backbone node, a geometric number of first-level leaves is attached
    (continue with probability ``p1``), and per first-level leaf a geometric
    number of second-level leaves (probability ``p2``). Returns None when the
    drawn backbone is empty.
    """
    backbone = int(2 * rng.random() * expected_backbone + 0.5)
    if backbone < 1:
        return None
    edges = [(i, i + 1) for i in range(backbone - 1)]
    nxt = backbone
    for node in range(backbone):
        while rng.random() < p1:
            edges.append((node, nxt))
            first = nxt
            nxt += 1
            while rng.random() < p2:
                edges.append((first, nxt))
                nxt += 1
    return Graph(nxt, edges)


def gen_lobster(
    count: int = 100,
    nmin: int = 10,
    nmax: int = 100,
    p1: float = 0.7,
    p2: float = 0.7,
    seed: int = 0,
) -> list[Graph]:
    """Rejection-sample ``count`` lobsters with node counts in [nmin, nmax]."""
    if count <= 0:
        raise ValueError("count must be positive")
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0):
        raise ValueError("branching probabilities must lie in (0, 1)")
    rng = np.random.default_rng([int(seed), 0x10B5])
    expected_backbone = 0.8 * nmax
    out: list[Graph] = []
    budget = 1000 * count
    while len(out) < count:
        if budget <= 0:
            raise RuntimeError("lobster rejection budget exhausted; size window too narrow")
        budget -= 1
        g = make_lobster(expected_backbone, p1, p2, rng)
        if g is not None and nmin <= g.n <= nmax:
            out.append(g)
    return out


def make_community(n: int, rng: np.random.Generator, p_intra: float = 0.3) -> Graph:
    """Two equal Erdos-Renyi halves joined by floor(0.05 n) distinct cross edges."""
    if n % 2 != 0:
        raise ValueError("community graphs need an even node count")
    half = n // 2
    edges = []
    for base in (0, half):
        for i in range(half):
            for j in range(i + 1, half):
                if rng.random() < p_intra:
                    edges.append((base + i, base + j))
    n_cross = int(0.05 * n)
    seen = set()
    while len(seen) < n_cross:
        u = int(rng.integers(0, half))
        v = int(rng.integers(half, n))
        if (u, v) not in seen:
            seen.add((u, v))
            edges.append((u, v))
    return Graph(n, edges)


def gen_community(seed: int = 0) -> list[Graph]:
    """510 two-community graphs with even node counts drawn uniformly from [60, 160]."""
    rng = np.random.default_rng([int(seed), 0xC0117])
    sizes = rng.integers(30, 81, size=510) * 2
    return [make_community(int(n), rng) for n in sizes]
