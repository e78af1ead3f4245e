"""Cross-validated training and evaluation for graph classification."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from cosgraph import autodiff as ad
from cosgraph.datasets import Dataset, stratified_assignment, stratified_folds
from cosgraph.features import DEFAULT_CLIQUE_BUDGET, FEATURE_FAMILIES, Augmentation, augment
from cosgraph.layers import CROSS_SCALES, READOUTS, build_dual
from cosgraph.model import BACKBONES, CosModel, make_batch

log = logging.getLogger(__name__)

REPORT_SCHEMA = "cosgraph-run-report/1"
BENCH_SCHEMA = "cosgraph-bench/1"


class ConfigError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch

    def __reduce__(self):
        return type(self), (self.args[0], self.epoch)


class FoldError(RuntimeError):
    def __init__(self, fold: int, cause: Exception):
        super().__init__(f"fold {fold}: {cause}")
        self.fold = fold
        self.cause = cause

    def __reduce__(self):
        return type(self), (self.fold, self.cause)


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    backbone: str = "cos-gcn"
    layers: int = 3
    hidden: int = 256
    lr: float = 0.001
    batch_size: int = 512
    epochs: int = 1000
    readout: str = "max"
    patience: int = 50
    seed: int = 42
    cross_scale: str = "inverse"
    standardize: bool = True
    folds: int = 10
    val_fraction: float = 0.1

    def __post_init__(self):
        problems = []
        if self.backbone not in BACKBONES:
            problems.append(f"backbone must be one of {BACKBONES}")
        if self.layers < 1:
            problems.append("layers must be >= 1")
        if self.hidden < 1:
            problems.append("hidden must be >= 1")
        if self.batch_size < 1:
            problems.append("batch size must be >= 1")
        if self.epochs < 1:
            problems.append("epochs must be >= 1")
        if not 0 <= self.patience < self.epochs:
            problems.append("patience must satisfy 0 <= patience < epochs")
        if not (self.lr >= 0 and math.isfinite(self.lr)):
            problems.append("lr must be a finite non-negative number")
        if self.readout not in READOUTS:
            problems.append(f"readout must be one of {READOUTS}")
        if self.cross_scale not in CROSS_SCALES:
            problems.append(f"cross_scale must be one of {CROSS_SCALES}")
        if self.folds < 2:
            problems.append("folds must be >= 2")
        if not 0 <= self.val_fraction < 1:
            problems.append("val_fraction must lie in [0, 1)")
        if problems:
            raise ConfigError("; ".join(problems))


# -- metrics -------------------------------------------------------------

def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise MetricError(f"{predictions.shape} predictions vs {labels.shape} labels")
    if labels.size == 0:
        raise MetricError("accuracy of an empty set")
    return float(np.mean(predictions == labels))


def auprc(scores, labels) -> float:
    """Area under the precision-recall curve as step-wise average precision.

    Tied scores form a single threshold.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape:
        raise MetricError(f"{scores.shape} scores vs {labels.shape} labels")
    positives = labels.sum()
    if positives == 0 or positives == labels.size:
        raise MetricError("AUPRC needs both positive and negative labels")
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last_of_group = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tp = np.cumsum(y)[last_of_group]
    predicted = last_of_group + 1
    precision = tp / predicted
    recall = tp / positives
    recall_prev = np.r_[0.0, recall[:-1]]
    return float(np.sum((recall - recall_prev) * precision))


# -- standardization -----------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    node_mean: np.ndarray
    node_std: np.ndarray
    graph_mean: np.ndarray
    graph_std: np.ndarray

    @classmethod
    def fit(cls, augs: Sequence[Augmentation]) -> "Standardizer":
        nodes = np.vstack([a.node for a in augs])
        graphs = np.vstack([a.graph for a in augs])

        def safe_std(x):
            s = x.std(axis=0)
            return np.where(s > 0, s, 1.0)

        return cls(nodes.mean(axis=0), safe_std(nodes), graphs.mean(axis=0), safe_std(graphs))

    @classmethod
    def identity(cls) -> "Standardizer":
        return cls(np.zeros(7), np.ones(7), np.zeros(6), np.ones(6))

    def __call__(self, aug: Augmentation) -> Augmentation:
        return Augmentation(
            (aug.node - self.node_mean) / self.node_std,
            (aug.graph - self.graph_mean) / self.graph_std,
        )


# -- training ------------------------------------------------------------

@dataclass
class FoldResult:
    fold: int
    seed: int
    test_accuracy: float
    test_auprc: float | None
    best_epoch: int
    epochs_run: int
    history: list[dict] = field(default_factory=list)
    train_seconds: float = 0.0
    inference_seconds: float = 0.0


class _Batches:
    """Batch builder over one dataset with cached dual graphs."""

    def __init__(self, ds: Dataset, augs: Sequence[Augmentation], cross_scale: str):
        self.graphs = ds.graphs
        self.augs = augs
        self.duals = [build_dual(g, cross_scale) for g in ds.graphs]

    def __call__(self, idx):
        idx = [int(i) for i in idx]
        return make_batch(
            [self.graphs[i] for i in idx],
            [self.augs[i] for i in idx],
            [self.duals[i] for i in idx],
        )


def _evaluate(model: CosModel, batch):
    logits = model.forward(batch).data
    loss = ad.softmax_cross_entropy(ad.Tensor(logits), batch.labels).item()
    return loss, logits


def train_fold(
    ds: Dataset,
    augs: Sequence[Augmentation],
    fold: tuple[np.ndarray, np.ndarray],
    cfg: TrainConfig,
    fold_index: int = 0,
) -> tuple[CosModel, FoldResult]:
    """Train on ``fold[0]`` with early stopping on a validation slice of it,
    then score the restored best model on ``fold[1]``."""
    if len(augs) != len(ds.graphs):
        raise ValueError(f"{len(augs)} augmentation records for {len(ds.graphs)} graphs")
    train_idx, test_idx = (np.asarray(x, dtype=np.int64) for x in fold)
    seed = cfg.seed + fold_index
    rng = np.random.default_rng(seed)

    stats = (
        Standardizer.fit([augs[i] for i in train_idx]) if cfg.standardize else Standardizer.identity()
    )
    scaled = [stats(a) for a in augs]
    batches = _Batches(ds, scaled, cfg.cross_scale)

    labels = ds.labels
    if cfg.val_fraction > 0:
        k = max(2, int(round(1.0 / cfg.val_fraction)))
        slot = stratified_assignment(labels[train_idx], k, rng)
        val_idx = np.sort(train_idx[slot == 0])
        fit_idx = np.sort(train_idx[slot != 0])
    else:
        val_idx = np.array([], dtype=np.int64)
        fit_idx = np.sort(train_idx)

    model = CosModel(
        cfg.backbone,
        ds.attribute_dim,
        ds.num_classes,
        hidden=cfg.hidden,
        layers=cfg.layers,
        readout=cfg.readout,
        cross_scale=cfg.cross_scale,
        seed=seed,
    )
    opt = ad.Adam(model.parameters(), lr=cfg.lr)
    full_batch = batches(fit_idx) if cfg.batch_size >= fit_idx.size else None
    val_batch = batches(val_idx) if val_idx.size else None

    best_loss = math.inf
    best_state = model.get_state()
    best_epoch = 0
    history = []
    t0 = time.perf_counter()
    for epoch in range(1, cfg.epochs + 1):
        if full_batch is not None:
            plan = [full_batch]
        else:
            order = fit_idx[rng.permutation(fit_idx.size)]
            plan = [batches(order[s:s + cfg.batch_size]) for s in range(0, order.size, cfg.batch_size)]
        total, seen = 0.0, 0
        for batch in plan:
            with ad.Tape():
                loss = ad.softmax_cross_entropy(model.forward(batch), batch.labels)
                if not math.isfinite(loss.item()):
                    raise DivergenceError(f"non-finite training loss at epoch {epoch}", epoch)
                grads = ad.backward(loss)
            opt.step(grads)
            total += loss.item() * batch.num_graphs
            seen += batch.num_graphs
        record = {"epoch": epoch, "train_loss": total / seen}
        if val_batch is not None:
            val_loss, val_logits = _evaluate(model, val_batch)
            if not math.isfinite(val_loss):
                raise DivergenceError(f"non-finite validation loss at epoch {epoch}", epoch)
            record["val_loss"] = val_loss
            record["val_accuracy"] = accuracy(val_logits.argmax(axis=1), val_batch.labels)
            monitor = val_loss
        else:
            monitor = record["train_loss"]
        history.append(record)
        if monitor < best_loss:
            best_loss = monitor
            best_state = model.get_state()
            best_epoch = epoch
        elif epoch - best_epoch >= cfg.patience:
            break
    train_seconds = time.perf_counter() - t0

    model.set_state(best_state)
    t1 = time.perf_counter()
    test_batch = batches(np.sort(test_idx))
    _, logits = _evaluate(model, test_batch)
    inference_seconds = time.perf_counter() - t1
    test_labels = test_batch.labels
    acc = accuracy(logits.argmax(axis=1), test_labels)
    pr = None
    if ds.num_classes == 2 and 0 < test_labels.sum() < test_labels.size:
        pr = auprc(ad.softmax(logits)[:, 1], test_labels == 1)
    result = FoldResult(
        fold_index, seed, acc, pr, best_epoch, len(history), history, train_seconds, inference_seconds
    )
    log.info("fold %d: accuracy %.4f after %d epochs (best %d)", fold_index, acc, len(history), best_epoch)
    return model, result


# -- cross-validation ----------------------------------------------------

@dataclass
class RunReport:
    dataset: str
    config: dict
    folds: list[FoldResult]
    augment_seconds: float = 0.0
    notes: dict = field(default_factory=dict)

    @property
    def fold_accuracies(self) -> list[float]:
        return [f.test_accuracy for f in self.folds]

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_accuracies))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_accuracies))

    def to_dict(self, include_timing: bool = True, include_history: bool = False) -> dict:
        folds = []
        for f in self.folds:
            entry = {
                "fold": f.fold,
                "seed": f.seed,
                "test_accuracy": f.test_accuracy,
                "test_auprc": f.test_auprc,
                "best_epoch": f.best_epoch,
                "epochs_run": f.epochs_run,
            }
            if include_history:
                entry["history"] = f.history
            folds.append(entry)
        auprcs = [f.test_auprc for f in self.folds if f.test_auprc is not None]
        out = {
            "schema": REPORT_SCHEMA,
            "dataset": self.dataset,
            "config": self.config,
            "seed": self.config.get("seed"),
            "notes": self.notes,
            "folds": folds,
            "accuracy": {"mean": self.mean, "std": self.std, "per_fold": self.fold_accuracies},
            "auprc": (
                {"mean": float(np.mean(auprcs)), "std": float(np.std(auprcs))}
                if len(auprcs) == len(self.folds) and auprcs
                else None
            ),
        }
        if include_timing:
            out["timing"] = {
                "augment_seconds": self.augment_seconds,
                "train_seconds": [f.train_seconds for f in self.folds],
                "inference_seconds": [f.inference_seconds for f in self.folds],
            }
        return out

    def to_json(self, include_timing: bool = True, include_history: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing, include_history), indent=2, sort_keys=True)


def augment_dataset(ds: Dataset, budget: int = DEFAULT_CLIQUE_BUDGET, workers: int = 1) -> list[Augmentation]:
    if workers > 1 and len(ds.graphs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_augment_one, [(g, budget, i) for i, g in enumerate(ds.graphs)]))
    return [augment(g, budget, graph_id=i) for i, g in enumerate(ds.graphs)]


def _augment_one(args):
    g, budget, i = args
    return augment(g, budget, graph_id=i)


def _run_fold(args):
    ds, augs, fold, cfg, i = args
    try:
        _, result = train_fold(ds, augs, fold, cfg, i)
    except Exception as exc:
        raise FoldError(i, exc) from exc
    return result


def cross_validate(
    ds: Dataset,
    cfg: TrainConfig,
    augs: Sequence[Augmentation] | None = None,
    workers: int = 1,
) -> RunReport:
    augment_seconds = 0.0
    if augs is None:
        t0 = time.perf_counter()
        augs = augment_dataset(ds, workers=workers)
        augment_seconds = time.perf_counter() - t0
    folds = stratified_folds(ds, cfg.folds, cfg.seed)
    jobs = [(ds, augs, fold, cfg, i) for i, fold in enumerate(folds)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_fold, jobs))
    else:
        results = [_run_fold(job) for job in jobs]
    notes = {
        "loss": "softmax cross-entropy",
        "optimizer": "adam(betas=(0.9, 0.999), eps=1e-8)",
        "node_inputs": {k: ds.info.get(k) for k in ("node_labels", "node_attributes")},
        "feature_order": "[one-hot node labels | continuous attributes]",
    }
    return RunReport(ds.name, asdict(cfg), results, augment_seconds, notes)


# -- benchmark -----------------------------------------------------------

BENCH_COLUMNS = ("graph", "num_nodes", "num_edges") + tuple(f"{f}_s" for f in FEATURE_FAMILIES) + ("total_s",)


def bench_augment(ds: Dataset, budget: int = DEFAULT_CLIQUE_BUDGET) -> list[dict]:
    """Wall-clock seconds per feature family for every graph."""
    rows = []
    for i, g in enumerate(ds.graphs):
        timings: dict[str, float] = {}
        augment(g, budget, graph_id=i, timings=timings)
        row = {"graph": i, "num_nodes": g.num_nodes, "num_edges": g.num_edges}
        for fam in FEATURE_FAMILIES:
            row[f"{fam}_s"] = timings.get(fam, 0.0)
        row["total_s"] = sum(row[f"{fam}_s"] for fam in FEATURE_FAMILIES)
        rows.append(row)
    return rows


def summarize_bench(rows: Sequence[dict]) -> dict:
    keys = [f"{fam}_s" for fam in FEATURE_FAMILIES] + ["total_s"]
    return {k: float(sum(r[k] for r in rows)) for k in keys}


def write_bench_csv(rows: Sequence[dict], path) -> None:
    with open(Path(path), "w", newline="") as fh:
        fh.write(f"# {BENCH_SCHEMA}\n")
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow(r)
