"""TUDataset ingestion, augmentation sidecar files and stratified folds."""

from __future__ import annotations

import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from cosgraph.features import GRAPH_FEATURES, NODE_FEATURES, Augmentation
from cosgraph.graph import Graph, build_graph, constant_attributes, one_hot_labels

SIDECAR_MAGIC = "# cosgraph-augmented"
SIDECAR_VERSION = 1


class IngestionError(RuntimeError):
    pass


class StratificationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    graphs: tuple[Graph, ...]
    num_classes: int
    attribute_dim: int
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)


def _resolve_dir(root_path, name: str) -> Path:
    root = Path(root_path)
    if (root / name).is_dir() and not (root / f"{name}_A.txt").exists():
        return root / name
    return root


def _read_rows(path: Path, dtype=float) -> list[list]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([dtype(tok) for tok in line.replace(",", " ").split()])
            except ValueError as exc:
                raise IngestionError(f"{path.name}:{lineno}: cannot parse {line!r}") from exc
    return rows


def _read_column(path: Path) -> np.ndarray:
    rows = _read_rows(path, int)
    for i, r in enumerate(rows, 1):
        if len(r) != 1:
            raise IngestionError(f"{path.name}:{i}: expected one integer per line")
    return np.array([r[0] for r in rows], dtype=np.int64)


def _read_matrix(path: Path, num_rows: int) -> np.ndarray:
    rows = _read_rows(path, float)
    if len(rows) != num_rows:
        raise IngestionError(f"{path.name}: {len(rows)} rows, expected {num_rows}")
    width = len(rows[0]) if rows else 0
    for i, r in enumerate(rows, 1):
        if len(r) != width:
            raise IngestionError(
                f"{path.name}:{i}: ragged row with {len(r)} values, expected {width}"
            )
    return np.array(rows, dtype=np.float64).reshape(num_rows, width)


def _dense_codes(values: np.ndarray) -> tuple[np.ndarray, list[int]]:
    alphabet = sorted(set(values.tolist()))
    index = {v: i for i, v in enumerate(alphabet)}
    return np.array([index[v] for v in values.tolist()], dtype=np.int64), alphabet


def load_tudataset(root_path, name: str | None = None) -> Dataset:
    """Load a TUDataset corpus from ``root_path`` (or ``root_path/name``).

    Node labels become one-hot columns placed before any continuous
    attributes; plain unlabeled graphs get one constant column. Graph labels
    are remapped to ``0..num_classes-1`` in sorted order.
    """
    root = Path(root_path)
    if name is None:
        name = root.name
    root = _resolve_dir(root, name)
    if not root.is_dir():
        raise IngestionError(f"dataset directory not found: {root}")

    def required(suffix):
        p = root / f"{name}_{suffix}.txt"
        if not p.is_file():
            raise IngestionError(f"missing required file {p.name} in {root}")
        return p

    edges_path = required("A")
    indicator = _read_column(required("graph_indicator"))
    graph_labels = _read_column(required("graph_labels"))
    num_nodes_total = indicator.size
    num_graphs = graph_labels.size
    if num_nodes_total and (indicator.min() < 1 or indicator.max() > num_graphs):
        raise IngestionError(f"graph indicator ids must lie in [1, {num_graphs}]")

    columns = []
    info = {"node_labels": False, "node_attributes": False}
    labels_path = root / f"{name}_node_labels.txt"
    if labels_path.is_file():
        raw = _read_matrix(labels_path, num_nodes_total)
        codes, alphabet = _dense_codes(raw[:, 0].astype(np.int64))
        columns.append(one_hot_labels(codes, len(alphabet)))
        info["node_labels"] = True
        info["node_label_alphabet"] = alphabet
    attrs_path = root / f"{name}_node_attributes.txt"
    if attrs_path.is_file():
        columns.append(_read_matrix(attrs_path, num_nodes_total))
        info["node_attributes"] = True
    features = np.hstack(columns) if columns else constant_attributes(num_nodes_total)

    edge_rows = _read_rows(edges_path, int)
    edges = np.array(edge_rows, dtype=np.int64).reshape(-1, 2) - 1
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes_total):
        raise IngestionError(f"{edges_path.name}: node index outside 1..{num_nodes_total}")

    gid = indicator - 1
    local = np.zeros(num_nodes_total, dtype=np.int64)
    counts = np.zeros(num_graphs, dtype=np.int64)
    for v, g in enumerate(gid):
        local[v] = counts[g]
        counts[g] += 1
    per_graph_edges: list[list[tuple[int, int]]] = [[] for _ in range(num_graphs)]
    for lineno, (u, v) in enumerate(edges, 1):
        if gid[u] != gid[v]:
            raise IngestionError(f"{edges_path.name}:{lineno}: edge joins two different graphs")
        per_graph_edges[gid[u]].append((local[u], local[v]))

    label_codes, label_alphabet = _dense_codes(graph_labels)
    info["graph_label_alphabet"] = label_alphabet
    graphs = []
    for g in range(num_graphs):
        rows = np.nonzero(gid == g)[0]
        graphs.append(
            build_graph(per_graph_edges[g], int(counts[g]), features[rows], int(label_codes[g]))
        )
    return Dataset(name, tuple(graphs), len(label_alphabet), features.shape[1], info)


def write_tudataset(ds_graphs: Sequence[Graph], out_dir, name: str, node_labels=None) -> Path:
    """Write graphs in TUDataset layout (used to build fixtures and toy corpora).

    ``node_labels`` (one integer per node, concatenated over graphs) is written
    to ``_node_labels.txt``; otherwise node attributes, if any, go to
    ``_node_attributes.txt``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    a_lines, ind_lines, lab_lines, attr_lines = [], [], [], []
    offset = 0
    for gi, g in enumerate(ds_graphs, 1):
        for u, v in g.edges():
            a_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            a_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        ind_lines.extend([str(gi)] * g.num_nodes)
        lab_lines.append(str(0 if g.label is None else g.label))
        if node_labels is None and g.node_attributes is not None:
            attr_lines.extend(", ".join(repr(float(x)) for x in row) for row in g.node_attributes)
        offset += g.num_nodes

    def dump(suffix, lines):
        (out / f"{name}_{suffix}.txt").write_text("".join(line + "\n" for line in lines))

    dump("A", a_lines)
    dump("graph_indicator", ind_lines)
    dump("graph_labels", lab_lines)
    if node_labels is not None:
        dump("node_labels", [str(int(x)) for x in node_labels])
    elif attr_lines:
        dump("node_attributes", attr_lines)
    return out


# -- augmentation sidecar ------------------------------------------------

def write_augmented(ds: Dataset, features: Sequence[Augmentation], out_path) -> None:
    """Write per-graph structural features as a versioned text file.

    Floats are written with ``repr`` so a reload is bit-exact.
    """
    if len(features) != len(ds.graphs):
        raise ValueError(
            f"{len(features)} augmentation records for {len(ds.graphs)} graphs"
        )
    for i, (g, rec) in enumerate(zip(ds.graphs, features)):
        if rec.node.shape != (g.num_nodes, len(NODE_FEATURES)) or rec.graph.shape != (len(GRAPH_FEATURES),):
            raise ValueError(f"augmentation record {i} has wrong shape")
    buf = io.StringIO()
    buf.write(f"{SIDECAR_MAGIC} v{SIDECAR_VERSION}\n")
    buf.write(f"dataset {ds.name}\n")
    buf.write(f"graphs {len(features)}\n")
    buf.write("node_columns " + " ".join(NODE_FEATURES) + "\n")
    buf.write("graph_columns " + " ".join(GRAPH_FEATURES) + "\n")
    for i, rec in enumerate(features):
        buf.write(f"graph {i} nodes {rec.node.shape[0]}\n")
        buf.write("gs " + " ".join(repr(float(x)) for x in rec.graph) + "\n")
        for row in rec.node:
            buf.write("ns " + " ".join(repr(float(x)) for x in row) + "\n")
    Path(out_path).write_text(buf.getvalue())


def read_augmented(path) -> tuple[str, list[Augmentation]]:
    """Load a sidecar written by :func:`write_augmented`; returns (dataset name, records)."""
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or not lines[0].startswith(SIDECAR_MAGIC):
        raise IngestionError(f"{path.name}: not an augmentation sidecar")
    version = lines[0][len(SIDECAR_MAGIC):].strip()
    if version != f"v{SIDECAR_VERSION}":
        raise IngestionError(f"{path.name}: unsupported sidecar version {version!r}")
    header = {}
    pos = 1
    while pos < len(lines) and not lines[pos].startswith("graph "):
        key, _, value = lines[pos].partition(" ")
        header[key] = value
        pos += 1
    if tuple(header.get("node_columns", "").split()) != NODE_FEATURES:
        raise IngestionError(f"{path.name}: unexpected node columns")
    if tuple(header.get("graph_columns", "").split()) != GRAPH_FEATURES:
        raise IngestionError(f"{path.name}: unexpected graph columns")
    records = []
    while pos < len(lines):
        parts = lines[pos].split()
        if len(parts) != 4 or parts[0] != "graph" or parts[2] != "nodes":
            raise IngestionError(f"{path.name}:{pos + 1}: expected graph block header")
        n = int(parts[3])
        gs = lines[pos + 1].split()
        if gs[0] != "gs" or len(gs) != 1 + len(GRAPH_FEATURES):
            raise IngestionError(f"{path.name}:{pos + 2}: malformed graph feature line")
        rows = []
        for k in range(n):
            ns = lines[pos + 2 + k].split()
            if ns[0] != "ns" or len(ns) != 1 + len(NODE_FEATURES):
                raise IngestionError(f"{path.name}:{pos + 3 + k}: malformed node feature line")
            rows.append([float(x) for x in ns[1:]])
        node = np.array(rows, dtype=np.float64).reshape(n, len(NODE_FEATURES))
        records.append(Augmentation(node, np.array([float(x) for x in gs[1:]])))
        pos += 2 + n
    expected = int(header.get("graphs", len(records)))
    if expected != len(records):
        raise IngestionError(f"{path.name}: header promises {expected} graphs, found {len(records)}")
    return header.get("dataset", ""), records


# -- folds ---------------------------------------------------------------

def stratified_assignment(labels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign each item a fold id in [0, k) with per-class counts balanced to ±1."""
    labels = np.asarray(labels)
    fold = np.empty(labels.size, dtype=np.int64)
    start = 0
    for c in np.unique(labels):
        members = np.nonzero(labels == c)[0]
        members = members[rng.permutation(members.size)]
        fold[members] = (start + np.arange(members.size)) % k
        start = (start + members.size) % k
    return fold


def stratified_folds(ds: Dataset, k: int = 10, seed: int = 42) -> list[tuple[np.ndarray, np.ndarray]]:
    if k < 2:
        raise StratificationError("k must be at least 2")
    labels = ds.labels
    classes, counts = np.unique(labels, return_counts=True)
    small = [(int(c), int(n)) for c, n in zip(classes, counts) if n < k]
    if small:
        raise StratificationError(f"classes with fewer than k={k} members: {small}")
    fold = stratified_assignment(labels, k, np.random.default_rng(seed))
    return [
        (np.nonzero(fold != i)[0], np.nonzero(fold == i)[0]) for i in range(k)
    ]


def data_root_fallback() -> str | None:
    return os.environ.get("COSGRAPH_DATA_ROOT")
