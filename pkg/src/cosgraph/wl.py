"""1-WL color refinement and WL-hard graph pairs separated by structural features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from cosgraph.features import GRAPH_FEATURES, NODE_FEATURES, augment
from cosgraph.graph import Graph, build_graph, cycle_graph, disjoint_union


@dataclass(frozen=True)
class ColorMap:
    colors: tuple[int, ...]
    histogram: tuple[tuple[int, int], ...]  # sorted (color, count) pairs
    iterations: int


def _histogram(colors) -> tuple[tuple[int, int], ...]:
    counts: dict[int, int] = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    return tuple(sorted(counts.items()))


def _canonical(keys) -> list[int]:
    # dense relabel by first appearance in node order
    table: dict = {}
    return [table.setdefault(k, len(table)) for k in keys]


def wl_refine(g: Graph, initial: Sequence | None = None, max_iters: int | None = None) -> ColorMap:
    """Refine node colors until the partition stops changing.

    Each round maps a node to the pair (own color, sorted neighbor colors),
    then relabels pairs densely. ``max_iters`` defaults to ``max(1, num_nodes)``.
    """
    n = g.num_nodes
    if max_iters is None:
        max_iters = max(1, n)
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    colors = _canonical(initial if initial is not None else [0] * n)
    adj = g.adjacency
    iterations = 0
    for _ in range(max_iters):
        iterations += 1
        keys = [(colors[v], tuple(sorted(colors[u] for u in adj[v]))) for v in range(n)]
        refined = _canonical(keys)
        stable = len(set(refined)) == len(set(colors))
        colors = refined
        if stable:
            break
    return ColorMap(tuple(colors), _histogram(colors), iterations)


def wl_distinguishes(g1: Graph, g2: Graph) -> bool:
    """True iff 1-WL assigns the two graphs different stable color histograms.

    Refinement runs on the disjoint union so both graphs share one color table.
    """
    if g1.num_nodes != g2.num_nodes:
        return True
    cmap = wl_refine(disjoint_union(g1, g2))
    n1 = g1.num_nodes
    return _histogram(cmap.colors[:n1]) != _histogram(cmap.colors[n1:])


def _fmt(x: float) -> str:
    return f"{x:g}"


def features_distinguish(g1: Graph, g2: Graph, atol: float = 1e-9) -> tuple[bool, str]:
    """Compare augmented features; graph entries first, then sorted node rows.

    Returns ``(differ, witness)`` where the witness names the first differing
    feature, e.g. ``"triangle_total: 0 vs 2"``. Empty witness if they agree.
    Coefficients are compared up to ``atol`` since their summation order
    depends on node numbering.
    """
    a1, a2 = augment(g1), augment(g2)
    for name, x, y in zip(GRAPH_FEATURES, a1.graph, a2.graph):
        if abs(x - y) > atol:
            return True, f"{name}: {_fmt(x)} vs {_fmt(y)}"
    if a1.node.shape != a2.node.shape:
        return True, f"num_nodes: {g1.num_nodes} vs {g2.num_nodes}"
    for j, name in enumerate(NODE_FEATURES):
        c1, c2 = np.sort(a1.node[:, j]), np.sort(a2.node[:, j])
        diff = np.nonzero(np.abs(c1 - c2) > atol)[0]
        if diff.size:
            i = diff[0]
            return True, f"{name}: {_fmt(c1[i])} vs {_fmt(c2[i])} (sorted position {i})"
    decimals = max(0, int(-np.log10(atol)))
    rows1 = sorted(map(tuple, np.round(a1.node, decimals).tolist()))
    rows2 = sorted(map(tuple, np.round(a2.node, decimals).tolist()))
    if rows1 != rows2:
        return True, "node feature rows differ as multisets"
    return False, ""


def rook_graph(k: int = 4) -> Graph:
    """k x k rook's graph, the Cartesian product K_k x K_k."""
    edges = []
    for a in range(k * k):
        for b in range(a + 1, k * k):
            if a // k == b // k or a % k == b % k:
                edges.append((a, b))
    return build_graph(edges, k * k)


def shrikhande_graph() -> Graph:
    """Cayley graph on Z4 x Z4 with connection set {±(1,0), ±(0,1), ±(1,1)}."""
    steps = {(1, 0), (3, 0), (0, 1), (0, 3), (1, 1), (3, 3)}
    edges = []
    for a in range(16):
        for b in range(a + 1, 16):
            d = ((b // 4 - a // 4) % 4, (b % 4 - a % 4) % 4)
            if d in steps:
                edges.append((a, b))
    return build_graph(edges, 16)


@dataclass(frozen=True)
class GraphPair:
    name: str
    first: Graph
    second: Graph
    first_name: str
    second_name: str
    notes: str


def builtin_pairs() -> dict[str, GraphPair]:
    return {
        "c6-2c3": GraphPair(
            "c6-2c3",
            cycle_graph(6),
            disjoint_union(cycle_graph(3), cycle_graph(3)),
            "C6",
            "2xC3",
            "both 2-regular on 6 nodes; one hexagon vs two disjoint triangles",
        ),
        "rook-shrikhande": GraphPair(
            "rook-shrikhande",
            rook_graph(4),
            shrikhande_graph(),
            "Rook 4x4",
            "Shrikhande",
            "both srg(16,6,2,2); rook's graph is K4 x K4 and contains 4-cliques, "
            "Shrikhande is a Z4 x Z4 Cayley graph whose largest cliques are triangles",
        ),
    }
