"""Node- and graph-level structural features.

Node feature columns (in order)::

    degree, triangle_count, clique_size, clique_count, core_number,
    triangle_clustering, square_clustering

Graph feature entries (in order)::

    triangle_total, max_clique_size, has_bridge, avg_clustering,
    avg_global_efficiency, avg_local_efficiency
"""

from __future__ import annotations

import time
from collections import deque
from typing import NamedTuple

import numpy as np

from cosgraph.graph import Graph

NODE_FEATURES = (
    "degree",
    "triangle_count",
    "clique_size",
    "clique_count",
    "core_number",
    "triangle_clustering",
    "square_clustering",
)
GRAPH_FEATURES = (
    "triangle_total",
    "max_clique_size",
    "has_bridge",
    "avg_clustering",
    "avg_global_efficiency",
    "avg_local_efficiency",
)

DEFAULT_CLIQUE_BUDGET = 10**8


class FeatureTimeoutError(RuntimeError):
    """Clique enumeration exceeded its work budget."""

    def __init__(self, message: str, graph_id=None):
        super().__init__(message)
        self.graph_id = graph_id


class Augmentation(NamedTuple):
    node: np.ndarray   # num_nodes x 7
    graph: np.ndarray  # 6


def node_triangles(g: Graph) -> np.ndarray:
    out = np.zeros(g.num_nodes, dtype=np.int64)
    for v in range(g.num_nodes):
        nv = g.neighbor_set(v)
        # each triangle through v is seen once from each of its two other corners
        out[v] = sum(len(nv & g.neighbor_set(u)) for u in nv) // 2
    return out


def maximal_cliques(g: Graph, budget: int = DEFAULT_CLIQUE_BUDGET, graph_id=None):
    """Yield maximal cliques as sorted lists (Bron-Kerbosch with pivoting).

    The pivot is the candidate with the most neighbors among the candidates,
    lowest index on ties. ``budget`` caps the number of search steps.
    """
    adj = [g.neighbor_set(v) for v in range(g.num_nodes)]
    steps = 0
    stack = [([], set(range(g.num_nodes)), set())]
    while stack:
        steps += 1
        if steps > budget:
            where = "" if graph_id is None else f" on graph {graph_id}"
            raise FeatureTimeoutError(
                f"clique enumeration exceeded budget of {budget} steps{where}", graph_id
            )
        clique, cand, excl = stack.pop()
        if not cand:
            if not excl:
                yield sorted(clique)
            continue
        pivot = min(cand, key=lambda u: (-len(cand & adj[u]), u))
        for v in sorted(cand - adj[pivot], reverse=True):
            stack.append((clique + [v], cand & adj[v], excl & adj[v]))
            cand = cand - {v}
            excl = excl | {v}


def node_cliques(g: Graph, budget: int = DEFAULT_CLIQUE_BUDGET, graph_id=None):
    """Per node: size of the largest clique containing it, and the number of
    maximal cliques containing it."""
    size = np.zeros(g.num_nodes, dtype=np.int64)
    count = np.zeros(g.num_nodes, dtype=np.int64)
    for clique in maximal_cliques(g, budget, graph_id):
        k = len(clique)
        for v in clique:
            count[v] += 1
            if k > size[v]:
                size[v] = k
    return size, count


def core_numbers(g: Graph) -> np.ndarray:
    """Core number of every node via bucket-based minimum-degree peeling."""
    n = g.num_nodes
    deg = g.degrees.astype(np.int64).copy()
    if n == 0:
        return deg
    max_deg = int(deg.max())
    bin_start = np.zeros(max_deg + 2, dtype=np.int64)
    for d in deg:
        bin_start[d + 1] += 1
    bin_start = np.cumsum(bin_start)
    pos = np.zeros(n, dtype=np.int64)
    order = np.zeros(n, dtype=np.int64)
    fill = bin_start[:-1].copy()
    for v in range(n):
        pos[v] = fill[deg[v]]
        order[pos[v]] = v
        fill[deg[v]] += 1
    start = bin_start[:-1].copy()
    for i in range(n):
        v = order[i]
        for u in g.neighbors(v):
            if deg[u] > deg[v]:
                du = deg[u]
                pu = pos[u]
                pw = start[du]
                w = order[pw]
                if u != w:
                    order[pu], order[pw] = w, u
                    pos[u], pos[w] = pw, pu
                start[du] += 1
                deg[u] -= 1
    return deg


def triangle_clustering(g: Graph, triangles: np.ndarray | None = None) -> np.ndarray:
    if triangles is None:
        triangles = node_triangles(g)
    deg = g.degrees.astype(np.float64)
    out = np.zeros(g.num_nodes, dtype=np.float64)
    mask = deg >= 2
    out[mask] = 2.0 * triangles[mask] / (deg[mask] * (deg[mask] - 1.0))
    return out


def square_clustering(g: Graph) -> np.ndarray:
    """Squares clustering coefficient (Lind, Gonzalez and Herrmann, 2005).

    For each neighbor pair (u, w) of v with q common neighbors besides v and
    theta = 1 if u ~ w, the pair offers q squares out of
    q + (deg u - eta) * (deg w - eta) potential ones, eta = 1 + q + theta.
    """
    out = np.zeros(g.num_nodes, dtype=np.float64)
    deg = g.degrees
    for v in range(g.num_nodes):
        nbrs = g.neighbors(v).tolist()
        existing = 0
        potential = 0
        for i, u in enumerate(nbrs):
            nu = g.neighbor_set(u)
            for w in nbrs[i + 1:]:
                q = len(nu & g.neighbor_set(w)) - 1
                eta = 1 + q + (1 if w in nu else 0)
                existing += q
                potential += q + (deg[u] - eta) * (deg[w] - eta)
        if potential > 0:
            out[v] = existing / potential
    return out


def graph_triangles(g: Graph, triangles: np.ndarray | None = None) -> int:
    if triangles is None:
        triangles = node_triangles(g)
    return int(triangles.sum() // 3)


def max_clique_size(g: Graph, budget: int = DEFAULT_CLIQUE_BUDGET, graph_id=None) -> int:
    best = 0
    for clique in maximal_cliques(g, budget, graph_id):
        best = max(best, len(clique))
    return best


def bridges(g: Graph) -> list[tuple[int, int]]:
    """All bridges, found with one iterative DFS low-link pass."""
    n = g.num_nodes
    disc = [-1] * n
    low = [0] * n
    found = []
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        # frames: (node, parent, neighbor iterator position)
        stack = [(root, -1, 0)]
        while stack:
            v, parent, i = stack[-1]
            nbrs = g.neighbors(v)
            if i < len(nbrs):
                stack[-1] = (v, parent, i + 1)
                u = int(nbrs[i])
                if u == parent:
                    continue
                if disc[u] < 0:
                    disc[u] = low[u] = timer
                    timer += 1
                    stack.append((u, v, 0))
                else:
                    low[v] = min(low[v], disc[u])
            else:
                stack.pop()
                if parent >= 0:
                    low[parent] = min(low[parent], low[v])
                    if low[v] > disc[parent]:
                        found.append((min(parent, v), max(parent, v)))
    return sorted(found)


def has_bridge(g: Graph) -> bool:
    return bool(bridges(g))


def avg_clustering(g: Graph, clustering: np.ndarray | None = None) -> float:
    if g.num_nodes == 0:
        return 0.0
    if clustering is None:
        clustering = triangle_clustering(g)
    return float(clustering.mean())


def _bfs_inverse_distance_sum(g: Graph, source: int) -> float:
    dist = {source: 0}
    queue = deque([source])
    total = 0.0
    while queue:
        v = queue.popleft()
        d = dist[v] + 1
        for u in g.neighbors(v).tolist():
            if u not in dist:
                dist[u] = d
                total += 1.0 / d
                queue.append(u)
    return total


def avg_global_efficiency(g: Graph) -> float:
    n = g.num_nodes
    if n < 2:
        return 0.0
    total = sum(_bfs_inverse_distance_sum(g, s) for s in range(n))
    return total / (n * (n - 1))


def local_efficiencies(g: Graph) -> np.ndarray:
    out = np.zeros(g.num_nodes, dtype=np.float64)
    for v in range(g.num_nodes):
        nbrs = g.neighbors(v)
        if nbrs.size >= 2:
            out[v] = avg_global_efficiency(g.induced_subgraph(nbrs.tolist()))
    return out


def avg_local_efficiency(g: Graph) -> float:
    if g.num_nodes == 0:
        return 0.0
    return float(local_efficiencies(g).mean())


FEATURE_FAMILIES = ("triangles", "cliques", "core", "squares", "bridge", "global_eff", "local_eff")


def augment(
    g: Graph,
    budget: int = DEFAULT_CLIQUE_BUDGET,
    graph_id=None,
    timings: dict | None = None,
) -> Augmentation:
    """Compute the 7-column node feature matrix and the 6-entry graph vector.

    If ``timings`` is given, wall-clock seconds per feature family are added
    into it under the names in ``FEATURE_FAMILIES``.
    """
    clock = {}

    def timed(name, fn, *args):
        t0 = time.perf_counter()
        result = fn(*args)
        clock[name] = clock.get(name, 0.0) + time.perf_counter() - t0
        return result

    n = g.num_nodes
    tri = timed("triangles", node_triangles, g)
    csize, ccount = timed("cliques", node_cliques, g, budget, graph_id)
    core = timed("core", core_numbers, g)
    tclust = timed("triangles", triangle_clustering, g, tri)
    sclust = timed("squares", square_clustering, g)
    bridge = timed("bridge", has_bridge, g)
    geff = timed("global_eff", avg_global_efficiency, g)
    leff = timed("local_eff", avg_local_efficiency, g)

    node = np.column_stack(
        [g.degrees, tri, csize, ccount, core, tclust, sclust]
    ).astype(np.float64).reshape(n, len(NODE_FEATURES))
    graph = np.array(
        [
            tri.sum() // 3,
            int(csize.max()) if n else 0,
            1.0 if bridge else 0.0,
            float(tclust.mean()) if n else 0.0,
            geff,
            leff,
        ],
        dtype=np.float64,
    )
    if timings is not None:
        for name in FEATURE_FAMILIES:
            timings[name] = timings.get(name, 0.0) + clock.get(name, 0.0)
    return Augmentation(node, graph)
