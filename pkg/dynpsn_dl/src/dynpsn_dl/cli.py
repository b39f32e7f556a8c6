"""Command-line front end: train DL baselines on a pipeline output
directory (labels.csv, folds.csv, dgdvm/, events/) and emit predictions
files the pipeline's evaluate/rank commands consume unmodified.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import zlib
from pathlib import Path

import numpy as np
import torch

from . import InterchangeError
from .graph import build_dgcn, build_sgcn, default_features, pad_snapshots
from .interchange import (
    Prediction,
    derive_seed,
    read_event_stream,
    read_folds,
    read_gdvm,
    read_labels,
    snapshot_adjacencies,
    validation_split,
    write_predictions,
)
from .regular import VARIANTS, build_variant
from .training import (
    GraphPolicy,
    RegularPolicy,
    train_graph,
    train_regular,
)


def _load_corpus(data: Path):
    labels = read_labels(data / "labels.csv")
    folds = read_folds(data / "folds.csv")
    gdvms = {}
    for path in sorted((data / "dgdvm").glob("*.dgdvm")):
        m = read_gdvm(path)
        gdvms[m.domain_id] = m.counts
    if set(gdvms) != set(labels) or set(folds) != set(labels):
        raise InterchangeError("labels, folds and count matrices disagree on domains")
    kept = np.nonzero(np.any(np.vstack([(m != 0).any(axis=0) for m in gdvms.values()]),
                             axis=0))[0]
    filtered = {d: m[:, kept].astype(np.float32) for d, m in gdvms.items()}
    return labels, folds, filtered


def _emit(data: Path, out: Path, method: str, rows, dataset_id: str,
          runtime: float, extra: dict) -> None:
    (out / "predictions").mkdir(parents=True, exist_ok=True)
    write_predictions(dataset_id, method, rows, out / "predictions" / f"{method}.csv")
    meta_dir = out / "metadata"
    meta_dir.mkdir(exist_ok=True)
    meta = {"stage": f"dl_{method}", "method_runtimes": {method: runtime}, **extra}
    (meta_dir / f"dl_{method}.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _predict_rows(model, samples, classes, labels, folds):
    rows = []
    model.eval()
    with torch.no_grad():
        for did, x in samples:
            probs = model.predict_proba(x)
            pick = classes[int(torch.argmax(probs))]
            rows.append(Prediction(domain_id=did, fold=folds[did],
                                   true_label=labels[did], predicted_label=pick,
                                   scores=[float(p) for p in probs]))
    return rows


def cmd_train_regular(args) -> int:
    data = Path(args.data)
    out = Path(args.out or args.data)
    labels, folds, gdvms = _load_corpus(data)
    classes = sorted(set(labels.values()))
    n_features = next(iter(gdvms.values())).shape[1]
    tensors = {d: torch.from_numpy(m) for d, m in gdvms.items()}
    class_index = {c: i for i, c in enumerate(classes)}
    policy = RegularPolicy(max_epochs=args.epochs)
    variant_id = sorted(VARIANTS).index(args.variant)
    rows = []
    seeds = {}
    t0 = time.perf_counter()
    n_folds = max(folds.values()) + 1
    epochs_dir = out / "epochs"
    epochs_dir.mkdir(parents=True, exist_ok=True)
    for f in range(n_folds):
        train_ids = sorted(d for d in labels if folds[d] != f)
        test_ids = sorted(d for d in labels if folds[d] == f)
        tr_ids, val_ids = validation_split(train_ids, labels,
                                           derive_seed(args.seed, f))
        seed = derive_seed(args.seed, f, variant_id) % (2 ** 31)
        seeds[f] = seed
        torch.manual_seed(seed)
        model = build_variant(args.variant, n_features, len(classes))
        train_samples = [(tensors[d], class_index[labels[d]]) for d in tr_ids]
        val_samples = [(tensors[d], class_index[labels[d]]) for d in val_ids]
        result = train_regular(model, train_samples, val_samples, policy)
        result.write_log(epochs_dir / f"{args.variant}_fold{f}.csv")
        rows += _predict_rows(model, [(d, tensors[d]) for d in test_ids],
                              classes, labels, folds)
    runtime = time.perf_counter() - t0
    _emit(data, out, args.variant, rows, args.dataset_id, runtime,
          {"seeds": seeds, "epochs": args.epochs, "variant": args.variant})
    print(f"{args.variant}: {len(rows)} predictions in {runtime:.1f}s")
    return 0


def cmd_train_graph(args) -> int:
    data = Path(args.data)
    out = Path(args.out or args.data)
    labels, folds, gdvms = _load_corpus(data)
    classes = sorted(set(labels.values()))
    class_index = {c: i for i, c in enumerate(classes)}
    streams = {}
    for path in sorted((data / "events").glob("*.events")):
        s = read_event_stream(path)
        streams[s.domain_id] = s
    if set(streams) != set(labels):
        raise InterchangeError("event streams and labels disagree on domains")
    p = max(s.n for s in streams.values())
    feat_dim = p if args.features == "default" else next(iter(gdvms.values())).shape[1]
    method = f"{args.model}-{args.features}"
    batches = {}
    for did, s in streams.items():
        adjacencies = snapshot_adjacencies(s)
        if args.features == "default":
            feats = default_features(s.n, feat_dim,
                                     derive_seed(args.seed, zlib.crc32(did.encode())) % (2 ** 31))
        else:
            feats = gdvms[did]
        batches[did] = pad_snapshots(adjacencies, feats, p=p)
    policy = GraphPolicy(max_epochs=args.epochs)
    rows = []
    seeds = {}
    t0 = time.perf_counter()
    n_folds = max(folds.values()) + 1
    epochs_dir = out / "epochs"
    epochs_dir.mkdir(parents=True, exist_ok=True)
    for f in range(n_folds):
        train_ids = sorted(d for d in labels if folds[d] != f)
        test_ids = sorted(d for d in labels if folds[d] == f)
        tr_ids, val_ids = validation_split(train_ids, labels,
                                           derive_seed(args.seed, f))
        seed = derive_seed(args.seed, f, 101 if args.model == "dgcn" else 202) % (2 ** 31)
        seeds[f] = seed
        torch.manual_seed(seed)
        if args.model == "dgcn":
            model = build_dgcn(args.features, feat_dim, len(classes))
        else:
            model = build_sgcn(feat_dim, len(classes))
        train_samples = [(batches[d], class_index[labels[d]]) for d in tr_ids]
        val_samples = [(batches[d], class_index[labels[d]]) for d in val_ids]
        result = train_graph(model, train_samples, val_samples, policy)
        result.write_log(epochs_dir / f"{method}_fold{f}.csv")
        rows += _predict_rows(model, [(d, batches[d]) for d in test_ids],
                              classes, labels, folds)
    runtime = time.perf_counter() - t0
    _emit(data, out, method, rows, args.dataset_id, runtime,
          {"seeds": seeds, "epochs": args.epochs, "model": args.model,
           "features": args.features, "padded_nodes": p})
    print(f"{method}: {len(rows)} predictions in {runtime:.1f}s")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dynpsn-dl",
                                     description="DL baselines over pipeline interchange files")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-regular", help="convolution + recurrent variants")
    p.add_argument("--data", required=True, help="pipeline output directory")
    p.add_argument("--out", help="output directory (default: --data)")
    p.add_argument("--variant", choices=sorted(VARIANTS), default="cnn2-lstm3")
    p.add_argument("--dataset-id", default="dataset", dest="dataset_id")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=100)

    p = sub.add_parser("train-graph", help="graph convolution models")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    p.add_argument("--model", choices=["dgcn", "sgcn"], default="sgcn")
    p.add_argument("--features", choices=["default", "graphlets"], default="graphlets")
    p.add_argument("--dataset-id", default="dataset", dest="dataset_id")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--epochs", type=int, default=100)

    args = parser.parse_args(argv)
    try:
        if args.command == "train-regular":
            return cmd_train_regular(args)
        return cmd_train_graph(args)
    except (InterchangeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
