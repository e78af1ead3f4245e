"""Immutable undirected simple graphs in compressed adjacency form."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised on invalid graph construction or queries."""


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph.

    ``indptr``/``indices`` hold the CSR form of the adjacency matrix; each
    neighbor row is sorted ascending. Arrays are made read-only on construction.
    """

    num_nodes: int
    indptr: np.ndarray
    indices: np.ndarray
    node_attributes: np.ndarray | None = None
    label: int | None = None
    _neighbor_sets: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.indptr, self.indices, self.node_attributes):
            if arr is not None:
                arr.setflags(write=False)
        if not self._neighbor_sets:
            sets = tuple(frozenset(self.neighbors(v).tolist()) for v in range(self.num_nodes))
            object.__setattr__(self, "_neighbor_sets", sets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def neighbor_set(self, v: int) -> frozenset:
        return self._neighbor_sets[v]

    @property
    def adjacency(self) -> list[list[int]]:
        return [self.neighbors(v).tolist() for v in range(self.num_nodes)]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def num_edges(self) -> int:
        return int(self.indices.size // 2)

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._neighbor_sets[u]

    def edges(self) -> list[tuple[int, int]]:
        """Normalized edge list, each pair ``(u, v)`` with ``u < v``, sorted."""
        out = []
        for u in range(self.num_nodes):
            for v in self.neighbors(u):
                if u < v:
                    out.append((u, int(v)))
        return out

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``v`` renamed to ``perm[v]``."""
        perm = np.asarray(perm, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.num_nodes)):
            raise GraphError("relabel requires a permutation of the node indices")
        edges = [(int(perm[u]), int(perm[v])) for u, v in self.edges()]
        attrs = None
        if self.node_attributes is not None:
            attrs = np.empty_like(self.node_attributes)
            attrs[perm] = self.node_attributes
        return build_graph(edges, self.num_nodes, attrs, self.label)

    def induced_subgraph(self, nodes: Sequence[int]) -> "Graph":
        nodes = list(nodes)
        index = {v: i for i, v in enumerate(nodes)}
        edges = [
            (index[u], index[w])
            for u in nodes
            for w in self.neighbors(u).tolist()
            if w in index and u < w
        ]
        return build_graph(edges, len(nodes))

    def with_attributes(self, attributes: np.ndarray | None, label: int | None = None) -> "Graph":
        attrs = None if attributes is None else _check_attributes(attributes, self.num_nodes)
        return Graph(
            self.num_nodes,
            self.indptr,
            self.indices,
            attrs,
            self.label if label is None else label,
            self._neighbor_sets,
        )


def _check_attributes(attributes, num_nodes: int) -> np.ndarray:
    attrs = np.array(attributes, dtype=np.float64, copy=True)
    if attrs.ndim == 1:
        attrs = attrs.reshape(-1, 1)
    if attrs.ndim != 2 or attrs.shape[0] != num_nodes:
        raise GraphError(
            f"attribute shape {attrs.shape} does not match num_nodes={num_nodes}"
        )
    return attrs


def build_graph(
    edges: Iterable[tuple[int, int]],
    num_nodes: int,
    attributes=None,
    label: int | None = None,
) -> Graph:
    """Build a graph from unordered edge pairs.

    Self-loops and duplicate edges (in either direction) are dropped.
    """
    if num_nodes < 0:
        raise GraphError(f"num_nodes must be non-negative, got {num_nodes}")
    rows: list[set[int]] = [set() for _ in range(num_nodes)]
    for u, v in edges:
        u, v = int(u), int(v)
        if not (0 <= u < num_nodes and 0 <= v < num_nodes):
            raise GraphError(f"endpoint out of range in edge ({u}, {v}) for num_nodes={num_nodes}")
        if u == v:
            continue
        rows[u].add(v)
        rows[v].add(u)
    indptr = np.zeros(num_nodes + 1, dtype=np.int64)
    for v, row in enumerate(rows):
        indptr[v + 1] = indptr[v] + len(row)
    indices = np.fromiter(
        (w for row in rows for w in sorted(row)), dtype=np.int64, count=int(indptr[-1])
    )
    attrs = None if attributes is None else _check_attributes(attributes, num_nodes)
    return Graph(num_nodes, indptr, indices, attrs, None if label is None else int(label))


def degree(g: Graph, v: int) -> int:
    if not 0 <= v < g.num_nodes:
        raise GraphError(f"node index {v} out of range for graph with {g.num_nodes} nodes")
    return int(g.indptr[v + 1] - g.indptr[v])


def one_hot_labels(labels: Sequence[int], alphabet_size: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    bad = (labels < 0) | (labels >= alphabet_size)
    if bad.any():
        raise GraphError(
            f"label {int(labels[bad][0])} outside alphabet of size {alphabet_size}"
        )
    out = np.zeros((labels.size, alphabet_size), dtype=np.float64)
    out[np.arange(labels.size), labels] = 1.0
    return out


def constant_attributes(num_nodes: int) -> np.ndarray:
    """Single all-ones attribute column used for unlabeled plain graphs."""
    return np.ones((num_nodes, 1), dtype=np.float64)


# Small named graphs used across tests and demos.

def path_graph(n: int) -> Graph:
    return build_graph([(i, i + 1) for i in range(n - 1)], n)


def cycle_graph(n: int) -> Graph:
    return build_graph([(i, (i + 1) % n) for i in range(n)], n)


def complete_graph(n: int) -> Graph:
    return build_graph([(i, j) for i in range(n) for j in range(i + 1, n)], n)


def star_graph(leaves: int) -> Graph:
    return build_graph([(0, i) for i in range(1, leaves + 1)], leaves + 1)


def empty_graph(n: int) -> Graph:
    return build_graph([], n)


def disjoint_union(*graphs: Graph) -> Graph:
    edges = []
    offset = 0
    for g in graphs:
        edges.extend((u + offset, v + offset) for u, v in g.edges())
        offset += g.num_nodes
    return build_graph(edges, offset)


def random_graph(n: int, p: float, rng: np.random.Generator) -> Graph:
    """Erdos-Renyi G(n, p)."""
    mask = rng.random((n, n)) < p
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if mask[i, j]]
    return build_graph(edges, n)
