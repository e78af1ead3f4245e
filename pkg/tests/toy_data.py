"""Synthetic corpora for training tests."""

import numpy as np

from cosgraph.datasets import Dataset
from cosgraph.graph import build_graph, constant_attributes


def _bipartite(n, rng):
    left = rng.integers(2, n - 1)
    edges = [(u, v) for u in range(left) for v in range(left, n) if rng.random() < 0.45]
    # chain the sides together so the graph is not mostly isolated nodes
    edges += [(i % left, left + i % (n - left)) for i in range(n)]
    return edges


def _triangle_rich(n, rng):
    edges = [(u, v) for u in range(n) for v in range(u + 1, n) if rng.random() < 0.2]
    for _ in range(int(rng.integers(3, 6))):
        a, b, c = rng.choice(n, 3, replace=False)
        edges += [(a, b), (b, c), (a, c)]
    return edges


def triangle_corpus(per_class=30, seed=0) -> Dataset:
    """Label 0: triangle-free bipartite graphs; label 1: graphs with planted triangles.

    All nodes carry the same constant attribute, so only structure separates
    the classes.
    """
    rng = np.random.default_rng(seed)
    graphs = []
    for label, maker in ((0, _bipartite), (1, _triangle_rich)):
        for _ in range(per_class):
            n = int(rng.integers(8, 15))
            graphs.append(build_graph(maker(n, rng), n, constant_attributes(n), label))
    order = rng.permutation(len(graphs))
    return Dataset("TRIANGLES-TOY", tuple(graphs[i] for i in order), 2, 1, {})
