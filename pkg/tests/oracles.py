"""Independent brute-force oracles shared by unit and acceptance tests."""

from itertools import combinations, permutations

import numpy as np

# canonical connected graphlets on 2..4 nodes, in standard order
_TEMPLATES = [
    (2, [(0, 1)]),  # edge
    (3, [(0, 1), (1, 2)]),  # path
    (3, [(0, 1), (1, 2), (0, 2)]),  # triangle
    (4, [(0, 1), (1, 2), (2, 3)]),  # path
    (4, [(0, 1), (0, 2), (0, 3)]),  # star
    (4, [(0, 1), (1, 2), (2, 3), (0, 3)]),  # cycle
    (4, [(0, 1), (1, 2), (0, 2), (2, 3)]),  # paw
    (4, [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3)]),  # diamond
    (4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]),  # clique
]


def _automorphism_classes(n, edges):
    eset = {frozenset(e) for e in edges}
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in permutations(range(n)):
        if {frozenset((perm[a], perm[b])) for a, b in edges} == eset:
            for i in range(n):
                a, b = find(i), find(perm[i])
                if a != b:
                    parent[a] = b
    classes = {}
    for i in range(n):
        classes.setdefault(find(i), []).append(i)
    return list(classes.values())


def _build_orbit_map():
    """position -> global orbit id per template; classes ordered by degree."""
    orbit_maps = []
    next_orbit = 0
    for n, edges in _TEMPLATES:
        deg = [0] * n
        for a, b in edges:
            deg[a] += 1
            deg[b] += 1
        classes = _automorphism_classes(n, edges)
        classes.sort(key=lambda cls: deg[cls[0]])
        pos_to_orbit = {}
        for cls in classes:
            for p in cls:
                pos_to_orbit[p] = next_orbit
            next_orbit += 1
        orbit_maps.append((n, edges, pos_to_orbit))
    assert next_orbit == 15
    return orbit_maps


_ORBIT_MAPS = _build_orbit_map()


def _connected(nodes, eset):
    nodes = list(nodes)
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        v = stack.pop()
        for w in nodes:
            if w not in seen and frozenset((v, w)) in eset:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(nodes)


def brute_force_orbit_counts(g) -> np.ndarray:
    """Orbit counts per node by exhaustive subset enumeration and
    permutation-based isomorphism matching. Only sensible for small graphs."""
    eset = {frozenset(e) for e in g.edges}
    counts = np.zeros((g.n, 15))
    for k in (2, 3, 4):
        for subset in combinations(range(g.n), k):
            induced = {e for e in eset if set(e) <= set(subset)}
            if not _connected(subset, eset):
                continue
            for n, tedges, pos_to_orbit in _ORBIT_MAPS:
                if n != k or len(tedges) != len(induced):
                    continue
                matched = None
                for perm in permutations(range(k)):
                    mapping = {subset[i]: perm[i] for i in range(k)}
                    if {frozenset((mapping[a], mapping[b])) for a, b in (tuple(e) for e in induced)} == {
                        frozenset(e) for e in tedges
                    }:
                        matched = mapping
                        break
                if matched is not None:
                    for node, pos in matched.items():
                        counts[node, pos_to_orbit[pos]] += 1
                    break
    return counts
