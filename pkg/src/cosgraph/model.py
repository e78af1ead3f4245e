"""CoS-GCN / CoS-GIN models: parameters, batched forward passes, checkpoints."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from cosgraph import autodiff as ad
from cosgraph.autodiff import Tensor
from cosgraph.features import GRAPH_FEATURES, NODE_FEATURES, Augmentation
from cosgraph.graph import Graph, constant_attributes
from cosgraph.layers import (
    CROSS_SCALES,
    MLP,
    READOUTS,
    DualGraph,
    Linear,
    aggregate_layers,
    batch_duals,
    build_dual,
    cos_gcn_layer,
    cos_gin_layer,
    fuse,
    gin_graph_readout,
    readout,
)

BACKBONES = ("cos-gcn", "cos-gin")
CHECKPOINT_VERSION = 1
NUM_NODE_STRUCT = len(NODE_FEATURES)
NUM_GRAPH_STRUCT = len(GRAPH_FEATURES)


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GraphBatch:
    dual: DualGraph
    x_n: np.ndarray    # N x d
    x_ns: np.ndarray   # N x 7
    x_gs: np.ndarray   # B x 6
    labels: np.ndarray | None

    @property
    def offsets(self) -> np.ndarray:
        return self.dual.offsets

    @property
    def num_graphs(self) -> int:
        return self.dual.num_graphs


def node_attributes(g: Graph) -> np.ndarray:
    return g.node_attributes if g.node_attributes is not None else constant_attributes(g.num_nodes)


def make_batch(
    graphs: Sequence[Graph],
    augs: Sequence[Augmentation],
    duals: Sequence[DualGraph] | None = None,
    cross_scale: str = "inverse",
) -> GraphBatch:
    if len(graphs) != len(augs):
        raise ModelError(f"{len(graphs)} graphs but {len(augs)} augmentation records")
    if duals is None:
        duals = [build_dual(g, cross_scale) for g in graphs]
    labels = None
    if all(g.label is not None for g in graphs):
        labels = np.array([g.label for g in graphs], dtype=np.int64)
    return GraphBatch(
        batch_duals(duals),
        np.vstack([node_attributes(g) for g in graphs]),
        np.vstack([a.node for a in augs]),
        np.vstack([a.graph for a in augs]),
        labels,
    )


class CosModel:
    """Parameter bundle and forward pass for either backbone.

    Parameters live in ``self.params`` in declaration order; that order is
    also the checkpoint order.
    """

    def __init__(
        self,
        backbone: str,
        in_dim: int,
        num_classes: int,
        hidden: int = 256,
        layers: int = 3,
        readout: str = "max",
        cross_scale: str = "inverse",
        seed: int = 42,
    ):
        if backbone not in BACKBONES:
            raise ModelError(f"backbone must be one of {BACKBONES}, got {backbone!r}")
        if layers < 1:
            raise ModelError("layers must be at least 1")
        if hidden < 1 or in_dim < 1 or num_classes < 1:
            raise ModelError("hidden, in_dim and num_classes must be positive")
        if readout not in READOUTS:
            raise ModelError(f"readout must be one of {READOUTS}, got {readout!r}")
        if cross_scale not in CROSS_SCALES:
            raise ModelError(f"cross_scale must be one of {CROSS_SCALES}, got {cross_scale!r}")
        self.backbone = backbone
        self.in_dim = in_dim
        self.num_classes = num_classes
        self.hidden = hidden
        self.layers = layers
        self.readout_kind = readout
        self.cross_scale = cross_scale
        self.seed = seed
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        if backbone == "cos-gcn":
            self._init_gcn(rng)
        else:
            self._init_gin(rng)
        h = hidden
        self.mlp_gs = self._mlp(rng, "mlp_gs", [NUM_GRAPH_STRUCT, h, h])
        self.classifier = self._mlp(rng, "classifier", [2 * h, h, h, num_classes])

    # -- construction -----------------------------------------------------

    def _weight(self, rng, name, fan_in, fan_out) -> Tensor:
        t = ad.glorot(rng, fan_in, fan_out, name)
        self.params[name] = t
        return t

    def _bias(self, name, width) -> Tensor:
        t = ad.zeros(1, width, name)
        self.params[name] = t
        return t

    def _linear(self, rng, name, fan_in, fan_out) -> Linear:
        return Linear(self._weight(rng, f"{name}.weight", fan_in, fan_out), self._bias(f"{name}.bias", fan_out))

    def _mlp(self, rng, name, widths, final_activation=False) -> MLP:
        layers = [
            self._linear(rng, f"{name}.{i}", widths[i], widths[i + 1])
            for i in range(len(widths) - 1)
        ]
        return MLP(layers, final_activation)

    def _init_gcn(self, rng):
        h = self.hidden
        self.conv = []
        for l in range(self.layers):
            in_n = self.in_dim if l == 0 else h
            in_ns = NUM_NODE_STRUCT if l == 0 else h
            self.conv.append(
                (self._weight(rng, f"conv{l}.w_n", in_n, h), self._weight(rng, f"conv{l}.w_ns", in_ns, h))
            )
        self.mlp_l = self._mlp(rng, "mlp_l", [2 * self.layers * h, h, h])

    @property
    def gin_input_dim(self) -> int:
        return max(self.in_dim, NUM_NODE_STRUCT)

    def _init_gin(self, rng):
        h = self.hidden
        self.gin = []
        for l in range(self.layers):
            width = self.gin_input_dim if l == 0 else h
            mlp_n = self._mlp(rng, f"gin{l}.mlp_n", [width, h, h], final_activation=True)
            mlp_ns = self._mlp(rng, f"gin{l}.mlp_ns", [width, h, h], final_activation=True)
            eps = ad.zeros(1, 1, f"gin{l}.eps")
            self.params[eps.name] = eps
            self.gin.append((mlp_n, mlp_ns, eps))
        self.fc_n = [self._linear(rng, f"fc_n{l}", h, h) for l in range(self.layers)]
        self.fc_ns = [self._linear(rng, f"fc_ns{l}", h, h) for l in range(self.layers)]
        self.mlp_l = self._mlp(rng, "mlp_l", [h, h, h])

    # -- forward ----------------------------------------------------------

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def _check_batch(self, batch: GraphBatch):
        if batch.x_n.shape[1] != self.in_dim:
            raise ModelError(f"model expects {self.in_dim} attribute columns, got {batch.x_n.shape[1]}")
        if batch.x_ns.shape[1] != NUM_NODE_STRUCT or batch.x_gs.shape[1] != NUM_GRAPH_STRUCT:
            raise ModelError("augmented features must have 7 node and 6 graph columns")

    def learned_representation(self, batch: GraphBatch) -> Tensor:
        """Graph representation from message passing alone (before fusion)."""
        self._check_batch(batch)
        dg = batch.dual
        if self.backbone == "cos-gcn":
            h_n, h_ns = Tensor(batch.x_n), Tensor(batch.x_ns)
            hs_n, hs_ns = [], []
            for w_n, w_ns in self.conv:
                h_n, h_ns = cos_gcn_layer(dg, h_n, h_ns, w_n, w_ns)
                hs_n.append(h_n)
                hs_ns.append(h_ns)
            return readout(aggregate_layers(hs_n, hs_ns), self.readout_kind, batch.offsets)
        width = self.gin_input_dim
        h_n = Tensor(_pad_columns(batch.x_n, width))
        h_ns = Tensor(_pad_columns(batch.x_ns, width))
        hs_n, hs_ns = [], []
        for mlp_n, mlp_ns, eps in self.gin:
            h_n, h_ns = cos_gin_layer(dg, h_n, h_ns, mlp_n, mlp_ns, eps)
            hs_n.append(h_n)
            hs_ns.append(h_ns)
        return gin_graph_readout(hs_n, hs_ns, self.fc_n, self.fc_ns, self.readout_kind, batch.offsets)

    def representation(self, batch: GraphBatch) -> Tensor:
        """Final graph representation ``h_g``, one row per graph."""
        h_l = self.learned_representation(batch)
        return fuse(h_l, Tensor(batch.x_gs), self.mlp_l, self.mlp_gs)

    def forward(self, batch: GraphBatch) -> Tensor:
        return self.classifier(self.representation(batch))

    __call__ = forward

    def predict(self, batch: GraphBatch) -> np.ndarray:
        return np.argmax(self.forward(batch).data, axis=1)

    # -- state ------------------------------------------------------------

    def get_state(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        if list(state) != list(self.params):
            raise ModelError("state keys do not match model parameters")
        for k, arr in state.items():
            if arr.shape != self.params[k].shape:
                raise ModelError(f"shape mismatch for {k}: {arr.shape} vs {self.params[k].shape}")
            self.params[k].data = np.array(arr, dtype=np.float64, copy=True)

    def zero_structural_branches(self) -> None:
        """Zero every parameter that reads structural features (CoS-GCN only).

        With zeroed structural inputs the model then computes exactly a plain
        GCN with the same attribute-side widths.
        """
        if self.backbone != "cos-gcn":
            raise ModelError("structural-branch zeroing is defined for cos-gcn")
        for _, w_ns in self.conv:
            w_ns.data[:] = 0.0
        first = self.mlp_l.layers[0].weight
        first.data[self.layers * self.hidden:] = 0.0
        for name, t in self.params.items():
            if name.startswith("mlp_gs."):
                t.data[:] = 0.0

    def config(self) -> dict:
        return {
            "backbone": self.backbone,
            "in_dim": self.in_dim,
            "num_classes": self.num_classes,
            "hidden": self.hidden,
            "layers": self.layers,
            "readout": self.readout_kind,
            "cross_scale": self.cross_scale,
            "seed": self.seed,
        }

    def save(self, path) -> None:
        header = dict(self.config(), version=CHECKPOINT_VERSION, order=list(self.params))
        arrays = {f"p{i:03d}": t.data for i, t in enumerate(self.params.values())}
        with open(path, "wb") as fh:
            np.savez(fh, header=np.array(json.dumps(header)), **arrays)

    @classmethod
    def load(cls, path) -> "CosModel":
        with np.load(Path(path), allow_pickle=False) as data:
            header = json.loads(str(data["header"]))
            if header.get("version") != CHECKPOINT_VERSION:
                raise ModelError(f"unsupported checkpoint version {header.get('version')}")
            order = header.pop("order")
            header.pop("version")
            model = cls(**header)
            if order != list(model.params):
                raise ModelError("checkpoint parameter order does not match the model layout")
            model.set_state({name: data[f"p{i:03d}"] for i, name in enumerate(order)})
        return model


def _pad_columns(x: np.ndarray, width: int) -> np.ndarray:
    if x.shape[1] == width:
        return x
    out = np.zeros((x.shape[0], width))
    out[:, : x.shape[1]] = x
    return out
