"""Graph statistics, squared-MMD scoring, rank aggregation, lobster validity.

Statistic descriptors follow the protocol used by the sequential-generation
benchmark lineage: degree / clustering / Laplacian-spectrum histograms with a
Gaussian kernel over total-variation distance, and a 15-entry mean orbit-count
vector (connected graphlets on up to 4 nodes) with a Euclidean-distance kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphdata.core import Graph

__all__ = [
    "StatHistogram",
    "MmdReport",
    "STATISTICS",
    "degree_stat",
    "clustering_stat",
    "orbit_stat",
    "spectra_stat",
    "graph_stat",
    "mmd2",
    "mmd_suite",
    "lobster_validity",
    "rank_table",
    "format_rank_table",
]

STATISTICS = ("degree", "clustering", "orbit", "spectra")

CLUSTERING_BINS = 100
SPECTRA_BINS = 200
ORBITS = 15


@dataclass
class StatHistogram:
    """Per-graph statistic descriptor.

    For histogram kinds ``bins`` is a normalized histogram; for ``orbit`` it
    is the mean orbit-count vector over nodes (15 entries).
    """

    kind: str
    bins: np.ndarray


def degree_stat(g: Graph) -> StatHistogram:
    """Normalized histogram of node degrees with integer bins 0..max_degree."""
    deg = g.degrees()
    hist = np.bincount(deg).astype(np.float64)
    return StatHistogram("degree", hist / hist.sum())


def clustering_stat(g: Graph) -> StatHistogram:
    """Local clustering coefficients binned into 100 uniform bins on [0, 1]."""
    masks = _neighbor_masks(g)
    deg = g.degrees()
    coeffs = np.zeros(g.n)
    for v in range(g.n):
        d = int(deg[v])
        if d < 2:
            continue
        m = masks[v]
        links = 0
        rest = m
        while rest:
            ubit = rest & -rest
            rest ^= ubit
            links += (masks[ubit.bit_length() - 1] & m).bit_count()
        coeffs[v] = links / (d * (d - 1))  # links double-counted, pairs = d(d-1)/2
    hist, _ = np.histogram(coeffs, bins=CLUSTERING_BINS, range=(0.0, 1.0))
    hist = hist.astype(np.float64)
    return StatHistogram("clustering", hist / hist.sum())


def spectra_stat(g: Graph) -> StatHistogram:
    """Eigenvalues of the normalized Laplacian, 200 uniform bins on [0, 2].

    Isolated nodes contribute eigenvalue 0 (pseudo-inverse degree convention).
    """
    a = g.adjacency().astype(np.float64)
    deg = a.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    lap = np.diag(deg) - a
    norm = (inv_sqrt[:, None] * lap) * inv_sqrt[None, :]
    eig = np.linalg.eigvalsh(norm)
    # quantize before binning so solver jitter cannot straddle bin edges
    eig = np.clip(np.round(eig, 8), 0.0, 2.0)
    hist, _ = np.histogram(eig, bins=SPECTRA_BINS, range=(0.0, 2.0))
    hist = hist.astype(np.float64)
    return StatHistogram("spectra", hist / hist.sum())


def orbit_stat(g: Graph) -> StatHistogram:
    """Mean per-node counts of the 15 orbits of connected graphlets on <= 4 nodes."""
    counts = orbit_counts(g)
    return StatHistogram("orbit", counts.mean(axis=0))


def graph_stat(g: Graph, kind: str) -> StatHistogram:
    fn = {
        "degree": degree_stat,
        "clustering": clustering_stat,
        "orbit": orbit_stat,
        "spectra": spectra_stat,
    }.get(kind)
    if fn is None:
        raise ValueError(f"unknown statistic kind: {kind!r}")
    return fn(g)


def _neighbor_masks(g: Graph) -> list[int]:
    masks = [0] * g.n
    for u, v in g.edges:
        masks[u] |= 1 << v
        masks[v] |= 1 << u
    return masks


def orbit_counts(g: Graph) -> np.ndarray:
    """Orbit participation counts per node (orbits 0..14, standard numbering)."""
    n = g.n
    masks = _neighbor_masks(g)
    counts = np.zeros((n, ORBITS), dtype=np.float64)
    counts[:, 0] = g.degrees()

    adj = g.neighbor_lists()
    for v in range(n):
        nv = adj[v]
        for i in range(len(nv)):
            for j in range(i + 1, len(nv)):
                u, w = nv[i], nv[j]
                if masks[u] >> w & 1:
                    counts[v, 3] += 1.0  # triangle, counted once per middle role
                else:
                    counts[v, 2] += 1.0
                    counts[u, 1] += 1.0
                    counts[w, 1] += 1.0

    for quad in _connected_quads(masks, n):
        _classify_quad(quad, masks, counts)
    return counts


def _connected_quads(masks: list[int], n: int):
    """Each connected induced 4-node subgraph exactly once (ESU enumeration)."""
    for v in range(n):
        above = -1 << (v + 1)  # candidate nodes must exceed the root index
        vbit = 1 << v
        ext0 = masks[v] & above
        closed0 = vbit | masks[v]
        stack = [((v,), ext0, closed0)]
        while stack:
            sub, ext, closed = stack.pop()
            if len(sub) == 3:
                while ext:
                    wbit = ext & -ext
                    ext ^= wbit
                    yield sub + (wbit.bit_length() - 1,)
                continue
            while ext:
                wbit = ext & -ext
                ext ^= wbit
                w = wbit.bit_length() - 1
                excl = masks[w] & above & ~closed
                stack.append((sub + (w,), ext | excl, closed | wbit | masks[w]))


# orbit id by (edge count, node degree inside the graphlet)
_QUAD_ORBIT = {
    (3, 1, False): 4,  # path end
    (3, 2, False): 5,  # path middle
    (3, 1, True): 6,  # star leaf
    (3, 3, True): 7,  # star center
    (4, 2, False): 8,  # 4-cycle
    (4, 1, True): 9,  # paw pendant
    (4, 2, True): 10,  # paw triangle rim
    (4, 3, True): 11,  # paw triangle apex
    (5, 2, False): 12,  # diamond rim
    (5, 3, False): 13,  # diamond hub
    (6, 3, False): 14,  # 4-clique
}


def _classify_quad(quad, masks, counts) -> None:
    a, b, c, d = quad
    sub = (1 << a) | (1 << b) | (1 << c) | (1 << d)
    degs = [(masks[x] & sub).bit_count() for x in quad]
    e = sum(degs) // 2
    if e == 3:
        star = 3 in degs
        for x, dg in zip(quad, degs):
            counts[x, _QUAD_ORBIT[(3, dg, star)]] += 1.0
    elif e == 4:
        paw = 3 in degs
        for x, dg in zip(quad, degs):
            counts[x, _QUAD_ORBIT[(4, dg, paw)]] += 1.0
    else:
        for x, dg in zip(quad, degs):
            counts[x, _QUAD_ORBIT[(e, dg, False)]] += 1.0


# -- squared MMD -----------------------------------------------------------


def _descriptor_matrix(stats: list[StatHistogram], width: int) -> np.ndarray:
    out = np.zeros((len(stats), width))
    for i, s in enumerate(stats):
        out[i, : len(s.bins)] = s.bins
    return out


def mmd2(set_a: list[StatHistogram], set_b: list[StatHistogram], sigma: float = 1.0) -> float:
    """Biased squared-MMD estimator between two sets of statistic descriptors.

    Gaussian kernel exp(-dist^2 / (2 sigma^2)); dist is total variation for
    histogram kinds and Euclidean for orbit vectors. Tiny negative results
    from diagonal cancellation are clamped to zero.
    """
    if not set_a or not set_b:
        raise ValueError("both descriptor sets must be nonempty")
    kinds = {s.kind for s in set_a} | {s.kind for s in set_b}
    if len(kinds) != 1:
        raise ValueError(f"statistic kinds differ: {sorted(kinds)}")
    kind = kinds.pop()
    width = max(len(s.bins) for s in set_a + set_b)
    xa = _descriptor_matrix(set_a, width)
    xb = _descriptor_matrix(set_b, width)

    def gram(x, y):
        if kind == "orbit":
            d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(-1)
        else:
            tv = 0.5 * np.abs(x[:, None, :] - y[None, :, :]).sum(-1)
            d2 = tv * tv
        return np.exp(-d2 / (2.0 * sigma * sigma))

    val = gram(xa, xa).mean() + gram(xb, xb).mean() - 2.0 * gram(xa, xb).mean()
    if val < -1e-12:
        raise AssertionError(f"MMD^2 estimator returned {val}, below clamping tolerance")
    return max(val, 0.0)


def mmd_suite(samples: list[Graph], reference: list[Graph], sigma: float = 1.0, workers: int = 1) -> dict[str, float]:
    """All four statistics between a sample set and a reference set."""
    scores = {}
    for kind in STATISTICS:
        sa = _stats_for(samples, kind, workers)
        sb = _stats_for(reference, kind, workers)
        scores[kind] = mmd2(sa, sb, sigma=sigma)
    return scores


def _stats_for(graphs: list[Graph], kind: str, workers: int) -> list[StatHistogram]:
    if workers > 1 and len(graphs) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_stat_task, [(g, kind) for g in graphs]))
    return [graph_stat(g, kind) for g in graphs]


def _stat_task(arg):
    g, kind = arg
    return graph_stat(g, kind)


# -- lobster validity --------------------------------------------------------


def lobster_validity(g: Graph) -> bool:
    """True iff removing two rounds of leaves leaves a (possibly empty) path."""
    alive = set(range(g.n))
    adj = {v: set() for v in alive}
    for u, v in g.edges:
        adj[u].add(v)
        adj[v].add(u)
    for _ in range(2):
        leaves = [v for v in alive if len(adj[v]) == 1]
        for v in leaves:
            for w in adj[v]:
                adj[w].discard(v)
            adj[v].clear()
            alive.discard(v)
    if len(alive) <= 1:
        return True
    if any(len(adj[v]) > 2 for v in alive):
        return False
    ends = [v for v in alive if len(adj[v]) == 1]
    if len(ends) != 2:
        return False  # cycles have none; forests of paths have more
    # must be a single connected path
    seen = {ends[0]}
    cur = ends[0]
    while True:
        nxt = [w for w in adj[cur] if w not in seen]
        if not nxt:
            break
        cur = nxt[0]
        seen.add(cur)
    return len(seen) == len(alive)


# -- rank aggregation ---------------------------------------------------------


@dataclass
class MmdReport:
    """Per-statistic score tables plus mean and average-rank summary rows."""

    statistics: list[str]
    algorithms: list[str]
    datasets: list[str]
    scores: dict = field(default_factory=dict)  # [stat][algo][dataset] -> float | None
    mean: dict = field(default_factory=dict)  # [stat][algo] -> float
    avg_rank: dict = field(default_factory=dict)  # [stat][algo] -> float


def rank_table(scores: dict) -> MmdReport:
    """Aggregate a ``scores[stat][algo][dataset]`` table (missing entries: None).

    Lower scores rank better; missing entries rank last; ties share the mean
    of the tied rank positions. The mean row averages available datasets only.
    """
    statistics = list(scores)
    algorithms = sorted({a for st in scores.values() for a in st})
    datasets = sorted({d for st in scores.values() for al in st.values() for d in al})
    report = MmdReport(statistics=statistics, algorithms=algorithms, datasets=datasets)
    for stat, table in scores.items():
        report.scores[stat] = {a: {d: table.get(a, {}).get(d) for d in datasets} for a in algorithms}
        report.mean[stat] = {}
        for a in algorithms:
            vals = [v for v in report.scores[stat][a].values() if v is not None]
            report.mean[stat][a] = float(np.mean(vals)) if vals else float("nan")
        ranks = {a: [] for a in algorithms}
        for d in datasets:
            entries = [(report.scores[stat][a][d], a) for a in algorithms]
            for a, r in _rank_one_dataset(entries).items():
                ranks[a].append(r)
        report.avg_rank[stat] = {a: float(np.mean(ranks[a])) for a in algorithms}
    return report


def _rank_one_dataset(entries) -> dict[str, float]:
    """Competition ranks with tie averaging; None scores share the last ranks."""
    present = sorted([(v, a) for v, a in entries if v is not None])
    missing = [a for v, a in entries if v is None]
    out: dict[str, float] = {}
    pos = 1
    i = 0
    while i < len(present):
        j = i
        while j < len(present) and present[j][0] == present[i][0]:
            j += 1
        shared = (pos + (pos + j - i - 1)) / 2.0
        for k in range(i, j):
            out[present[k][1]] = shared
        pos += j - i
        i = j
    if missing:
        shared = (pos + (pos + len(missing) - 1)) / 2.0
        for a in missing:
            out[a] = shared
    return out


def format_rank_table(report: MmdReport) -> str:
    """Human-readable table: one block per statistic, mean and rank columns."""
    lines = []
    for stat in report.statistics:
        lines.append(f"== {stat} ==")
        header = ["algorithm"] + report.datasets + ["mean", "rank"]
        rows = [header]
        for a in report.algorithms:
            row = [a]
            for d in report.datasets:
                v = report.scores[stat][a][d]
                row.append("--" if v is None else f"{v:.4g}")
            row.append(f"{report.mean[stat][a]:.4g}")
            row.append(f"{report.avg_rank[stat][a]:.2f}")
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(header))]
        for r in rows:
            lines.append("  ".join(x.ljust(w) for x, w in zip(r, widths)))
        lines.append("")
    return "\n".join(lines)
