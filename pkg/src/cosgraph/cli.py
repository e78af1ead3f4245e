"""Command-line entry point: ``cosgraph {augment,train,wl-demo,bench}``.

Exit codes:
    0  success
    1  unexpected failure
    2  dataset or sidecar could not be read
    3  structural feature budget exceeded
    4  training diverged
    5  invalid configuration
    6  a wl-demo verdict did not match its expectation
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from cosgraph.datasets import (
    IngestionError,
    data_root_fallback,
    load_tudataset,
    read_augmented,
    write_augmented,
)
from cosgraph.features import DEFAULT_CLIQUE_BUDGET, FEATURE_FAMILIES, FeatureTimeoutError, augment
from cosgraph.graph import disjoint_union
from cosgraph.layers import CROSS_SCALES, READOUTS
from cosgraph.model import BACKBONES
from cosgraph.training import (
    ConfigError,
    DivergenceError,
    FoldError,
    TrainConfig,
    augment_dataset,
    bench_augment,
    cross_validate,
    summarize_bench,
    write_bench_csv,
)
from cosgraph.wl import builtin_pairs, features_distinguish, wl_refine

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INGESTION = 2
EXIT_TIMEOUT = 3
EXIT_DIVERGENCE = 4
EXIT_CONFIG = 5
EXIT_VERDICT = 6

log = logging.getLogger("cosgraph")


def _default_workers() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def resolve_data(given: str | None) -> Path:
    """Dataset directory from ``--data``, falling back to ``COSGRAPH_DATA_ROOT``."""
    root = data_root_fallback()
    if given is None:
        if root is None:
            raise IngestionError("no --data given and COSGRAPH_DATA_ROOT is unset")
        return Path(root)
    path = Path(given)
    if not path.exists() and root is not None and (Path(root) / given).exists():
        return Path(root) / given
    if not path.exists():
        raise IngestionError(f"dataset directory not found: {path}")
    return path


def default_sidecar(name: str) -> Path:
    return Path(f"{name}.aug.txt")


def _augment_all(ds, budget, workers):
    # per-family timings are only collected on the serial path
    timings = {fam: 0.0 for fam in FEATURE_FAMILIES}
    if workers > 1:
        return augment_dataset(ds, budget, workers), None
    augs = []
    for i, g in enumerate(ds.graphs):
        t = {}
        augs.append(augment(g, budget, graph_id=i, timings=t))
        for k, v in t.items():
            timings[k] += v
    return augs, timings


# -- subcommands ---------------------------------------------------------

def cmd_augment(args) -> int:
    ds = load_tudataset(resolve_data(args.data))
    out = Path(args.out) if args.out else default_sidecar(ds.name)
    t0 = time.perf_counter()
    augs, timings = _augment_all(ds, args.budget, args.workers)
    elapsed = time.perf_counter() - t0
    write_augmented(ds, augs, out)
    print(f"{ds.name}: {len(ds)} graphs augmented in {elapsed:.3f}s -> {out}")
    if timings is not None:
        for fam in FEATURE_FAMILIES:
            print(f"  {fam:<12} {timings[fam]:.4f}s")
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        backbone=args.backbone,
        layers=args.layers,
        hidden=args.hidden,
        lr=args.lr,
        batch_size=args.batch,
        epochs=args.epochs,
        readout=args.readout,
        patience=args.patience,
        seed=args.seed,
        cross_scale=args.cross_scale,
        standardize=args.standardize == "on",
        folds=args.folds,
    )


def _load_sidecar(path: Path, ds):
    name, records = read_augmented(path)
    if name != ds.name or len(records) != len(ds):
        raise IngestionError(
            f"sidecar {path} holds {len(records)} records for {name!r}, "
            f"dataset {ds.name!r} has {len(ds)} graphs"
        )
    for i, (g, rec) in enumerate(zip(ds.graphs, records)):
        if rec.node.shape[0] != g.num_nodes:
            raise IngestionError(f"sidecar {path}: graph {i} has {rec.node.shape[0]} rows, expected {g.num_nodes}")
    return records


def cmd_train(args) -> int:
    cfg = _train_config(args)  # validate before touching any data
    data = resolve_data(args.data)
    ds = load_tudataset(data)
    sidecar = Path(args.sidecar) if args.sidecar else default_sidecar(ds.name)
    augment_seconds = 0.0
    if args.augment_inline:
        t0 = time.perf_counter()
        augs, _ = _augment_all(ds, args.budget, args.workers)
        augment_seconds = time.perf_counter() - t0
        source = "inline"
    elif sidecar.is_file():
        augs = _load_sidecar(sidecar, ds)
        source = str(sidecar)
    else:
        raise IngestionError(f"sidecar {sidecar} not found; run `augment` first or pass --augment-inline")

    print("config: " + json.dumps(cfg.__dict__, sort_keys=True))
    report = cross_validate(ds, cfg, augs, workers=args.workers)
    report.augment_seconds = augment_seconds
    report.notes["data"] = str(data)
    report.notes["augmentation"] = source
    out = Path(args.out) if args.out else Path(f"{ds.name}_report.json")
    out.write_text(report.to_json(include_history=args.history) + "\n")
    for f in report.folds:
        log.info("fold %d: accuracy %.4f (best epoch %d of %d)", f.fold, f.test_accuracy, f.best_epoch, f.epochs_run)
    print(f"{ds.name} {cfg.backbone}: accuracy {report.mean:.4f} ± {report.std:.4f} over {len(report.folds)} folds -> {out}")
    return EXIT_OK


def _hist(colors):
    counts: dict[int, int] = {}
    for c in colors:
        counts[c] = counts.get(c, 0) + 1
    return tuple(sorted(counts.items()))


def _format_hist(hist) -> str:
    return " ".join(f"{c}:{k}" for c, k in hist)


def cmd_wl_demo(args) -> int:
    pairs = builtin_pairs()
    names = sorted(pairs) if args.pair == "all" else [args.pair]
    ok = True
    for name in names:
        p = pairs[name]
        n1 = p.first.num_nodes
        cmap = wl_refine(disjoint_union(p.first, p.second))
        h1 = _hist(cmap.colors[:n1])
        h2 = _hist(cmap.colors[n1:])
        wl_same = h1 == h2 and n1 == p.second.num_nodes
        differ, witness = features_distinguish(p.first, p.second)
        print(f"pair {name}: {p.first_name} vs {p.second_name} ({p.notes})")
        print(f"  stable colors after {cmap.iterations} rounds")
        print(f"    {p.first_name}: {_format_hist(h1)}")
        print(f"    {p.second_name}: {_format_hist(h2)}")
        print(f"  WL: {'indistinguishable' if wl_same else 'distinguished'} / "
              f"features: {'distinguished' if differ else 'indistinguishable'}")
        if differ:
            print(f"  witness: {witness}")
        if not (wl_same and differ):
            print("  expected WL indistinguishable and features distinguished", file=sys.stderr)
            ok = False
    return EXIT_OK if ok else EXIT_VERDICT


def cmd_bench(args) -> int:
    ds = load_tudataset(resolve_data(args.data))
    rows = bench_augment(ds, args.budget)
    out = Path(args.out) if args.out else Path(f"{ds.name}_bench.csv")
    write_bench_csv(rows, out)
    summary = summarize_bench(rows)
    print(f"{ds.name}: {len(rows)} graphs -> {out}")
    for key, value in summary.items():
        print(f"  {key[:-2]:<12} {value:.4f}s")
    return EXIT_OK


# -- parsing -------------------------------------------------------------

def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cosgraph", description="Structure-augmented dual-graph GNNs.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    def data_args(p, out_help):
        p.add_argument("--data", help="TUDataset directory (or name under COSGRAPH_DATA_ROOT)")
        p.add_argument("--out", help=out_help)
        p.add_argument("--budget", type=int, default=DEFAULT_CLIQUE_BUDGET, help="clique enumeration step budget")

    p = sub.add_parser("augment", help="compute structural features and write a sidecar file")
    data_args(p, "sidecar path (default: ./<NAME>.aug.txt)")
    p.add_argument("--workers", type=_positive_int, default=_default_workers())
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("train", help="10-fold cross-validated training")
    data_args(p, "report path (default: ./<NAME>_report.json)")
    p.add_argument("--sidecar", help="augmentation sidecar (default: ./<NAME>.aug.txt)")
    p.add_argument("--augment-inline", action="store_true", help="compute features instead of reading a sidecar")
    p.add_argument("--backbone", choices=BACKBONES, default="cos-gcn")
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--hidden", type=int, default=256)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--batch", type=int, default=512)
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=50)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--readout", choices=READOUTS, default="max")
    p.add_argument("--cross-scale", choices=CROSS_SCALES, default="inverse")
    p.add_argument("--standardize", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--workers", type=_positive_int, default=_default_workers())
    p.add_argument("--history", action="store_true", help="include per-epoch history in the report")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("wl-demo", help="1-WL versus structural features on hard graph pairs")
    p.add_argument("--pair", choices=sorted(builtin_pairs()) + ["all"], default="all")
    p.set_defaults(func=cmd_wl_demo)

    p = sub.add_parser("bench", help="per-graph feature timing table")
    data_args(p, "CSV path (default: ./<NAME>_bench.csv)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.quiet else (logging.DEBUG if args.verbose > 1 else
                                                 logging.INFO if args.verbose else logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IngestionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGESTION
    except FeatureTimeoutError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except FoldError as exc:
        cause = exc.cause
        print(f"error: fold {exc.fold}: {cause}", file=sys.stderr)
        if isinstance(cause, DivergenceError):
            return EXIT_DIVERGENCE
        if isinstance(cause, FeatureTimeoutError):
            return EXIT_TIMEOUT
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
