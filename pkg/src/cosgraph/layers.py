"""Dual-graph message passing: CoS-GCN and CoS-GIN layers, readouts and fusion.

A graph G and a copy carrying the structural node features are joined by
identity links into one 2n-node graph with block adjacency [[A, I], [I, A]].
With self-loops added, symmetric normalization of that graph splits into a
within-copy operator (D+2I)^-1/2 (A+I) (D+2I)^-1/2 and a diagonal cross-copy
factor (D+2I)^-1, which is what the layers below apply blockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from cosgraph import autodiff as ad
from cosgraph.autodiff import Tensor
from cosgraph.graph import Graph

CROSS_SCALES = ("inverse", "paper-literal")
READOUTS = ("max", "mean")


class LayerError(ValueError):
    pass


def adjacency_matrix(g: Graph) -> sp.csr_matrix:
    data = np.ones(g.indices.size)
    return sp.csr_matrix((data, g.indices, g.indptr), shape=(g.num_nodes, g.num_nodes))


@dataclass(frozen=True, eq=False)
class DualGraph:
    """Precomputed operators for message passing on the dual graph.

    ``offsets`` marks graph boundaries when several graphs are batched into
    one block-diagonal system; a single graph has ``offsets == [0, n]``.
    """

    base: Graph | None
    normalized_adjacency: sp.csr_matrix
    cross_scale: np.ndarray
    adjacency: sp.csr_matrix
    offsets: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.normalized_adjacency.shape[0]

    @property
    def num_graphs(self) -> int:
        return len(self.offsets) - 1


def build_dual(g: Graph, cross_scale: str = "inverse") -> DualGraph:
    if cross_scale not in CROSS_SCALES:
        raise LayerError(f"cross_scale must be one of {CROSS_SCALES}, got {cross_scale!r}")
    a = adjacency_matrix(g)
    deg = g.degrees.astype(np.float64)
    with_loops = (a + sp.identity(g.num_nodes, format="csr")).tocoo()
    weight = 1.0 / np.sqrt((deg[with_loops.row] + 2.0) * (deg[with_loops.col] + 2.0))
    a_hat = sp.csr_matrix((weight, (with_loops.row, with_loops.col)), shape=a.shape)
    if cross_scale == "inverse":
        cross = 1.0 / (deg + 2.0)
    else:
        cross = deg + 2.0
    return DualGraph(g, a_hat, cross, a, np.array([0, g.num_nodes]))


def batch_duals(duals: Sequence[DualGraph]) -> DualGraph:
    """Block-diagonal composition of several dual graphs."""
    if not duals:
        raise LayerError("cannot batch zero graphs")
    sizes = [d.num_nodes for d in duals]
    return DualGraph(
        None,
        sp.block_diag([d.normalized_adjacency for d in duals], format="csr"),
        np.concatenate([d.cross_scale for d in duals]),
        sp.block_diag([d.adjacency for d in duals], format="csr"),
        np.concatenate([[0], np.cumsum(sizes)]),
    )


def _check_rows(dg: DualGraph, *tensors: Tensor) -> None:
    for t in tensors:
        if t.rows != dg.num_nodes:
            raise LayerError(f"expected {dg.num_nodes} node rows, got shape {t.shape}")


def cos_gcn_layer(dg: DualGraph, h_n: Tensor, h_ns: Tensor, w_n: Tensor, w_ns: Tensor):
    """One CoS-GCN step with separate filters for the two feature copies."""
    _check_rows(dg, h_n, h_ns)
    if w_n.cols != w_ns.cols:
        raise LayerError(f"filter output widths differ: {w_n.shape} vs {w_ns.shape}")
    if h_n.cols != w_n.rows or h_ns.cols != w_ns.rows:
        raise LayerError(
            f"feature/filter mismatch: {h_n.shape}@{w_n.shape}, {h_ns.shape}@{w_ns.shape}"
        )
    p_n = ad.matmul(h_n, w_n)
    p_ns = ad.matmul(h_ns, w_ns)
    cross = Tensor(dg.cross_scale.reshape(-1, 1))
    out_n = ad.relu(ad.add(ad.spmm(dg.normalized_adjacency, p_n), ad.mul(cross, p_ns)))
    out_ns = ad.relu(ad.add(ad.spmm(dg.normalized_adjacency, p_ns), ad.mul(cross, p_n)))
    return out_n, out_ns


def aggregate_layers(h_n_layers: Sequence[Tensor], h_ns_layers: Sequence[Tensor]) -> Tensor:
    """Concatenate ``[H_n^1..H_n^L, H_ns^1..H_ns^L]`` column-wise."""
    parts = list(h_n_layers) + list(h_ns_layers)
    if len({p.rows for p in parts}) > 1:
        raise LayerError(f"row counts differ across layers: {[p.shape for p in parts]}")
    return ad.concat(parts, axis=1)


def readout(h: Tensor, kind: str = "max", offsets=None) -> Tensor:
    """Per-graph column-wise max or mean; one output row per segment."""
    if h.rows == 0:
        raise LayerError("readout over a graph with no nodes")
    if offsets is None:
        offsets = np.array([0, h.rows])
    if kind == "max":
        return ad.segment_max(h, offsets)
    if kind == "mean":
        return ad.segment_mean(h, offsets)
    raise LayerError(f"unknown readout {kind!r}")


class Linear:
    def __init__(self, weight: Tensor, bias: Tensor):
        self.weight = weight
        self.bias = bias

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.weight), self.bias)


class MLP:
    """Stack of linear layers with ReLU between them (and optionally after)."""

    def __init__(self, layers: Sequence[Linear], final_activation: bool = False):
        self.layers = list(layers)
        self.final_activation = final_activation

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1 or self.final_activation:
                x = ad.relu(x)
        return x

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.rows

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.cols


def cos_gin_layer(dg: DualGraph, h_n: Tensor, h_ns: Tensor, mlp_n, mlp_ns, eps: Tensor):
    """One CoS-GIN step: each copy sums (1+eps)*self, neighbors and its twin node."""
    _check_rows(dg, h_n, h_ns)
    if h_n.cols != h_ns.cols:
        raise LayerError(f"feature widths differ: {h_n.shape} vs {h_ns.shape}")
    one_plus_eps = ad.add(Tensor(1.0), eps)
    agg_n = ad.add(
        ad.add(ad.mul(h_n, one_plus_eps), ad.spmm(dg.adjacency, h_n)), h_ns
    )
    agg_ns = ad.add(
        ad.add(ad.mul(h_ns, one_plus_eps), ad.spmm(dg.adjacency, h_ns)), h_n
    )
    return mlp_n(agg_n), mlp_ns(agg_ns)


def gin_graph_readout(
    h_n_layers: Sequence[Tensor],
    h_ns_layers: Sequence[Tensor],
    fc_n: Sequence,
    fc_ns: Sequence,
    kind: str = "max",
    offsets=None,
) -> Tensor:
    """Sum of per-layer projected readouts over both copies."""
    if not h_n_layers or len(h_n_layers) != len(h_ns_layers):
        raise LayerError("need the same positive number of layers for both copies")
    if len(fc_n) != len(h_n_layers) or len(fc_ns) != len(h_ns_layers):
        raise LayerError("one FC map per layer is required")
    total = None
    for hs, fcs in ((h_n_layers, fc_n), (h_ns_layers, fc_ns)):
        for h, fc in zip(hs, fcs):
            term = fc(readout(h, kind, offsets))
            if total is not None and term.shape != total.shape:
                raise LayerError(f"readout widths differ across layers: {term.shape} vs {total.shape}")
            total = term if total is None else ad.add(total, term)
    return total


def fuse(h_l: Tensor, x_gs: Tensor, mlp_l, mlp_gs) -> Tensor:
    """Concatenate the learned and the graph-structural representations."""
    if x_gs.cols != 6:
        raise LayerError(f"graph structural features need 6 columns, got {x_gs.shape}")
    if x_gs.rows != h_l.rows:
        raise LayerError(f"{h_l.rows} graph representations vs {x_gs.rows} feature rows")
    return ad.concat([mlp_l(h_l), mlp_gs(x_gs)], axis=1)
