"""Command-line front end.

Subcommands: synth, build, count, featurize, train-lr, evaluate, rank,
stats, report, oracle. Configuration comes from --config (JSON) with flag
overrides; flags win over the file, the file over defaults. Fatal pipeline
errors exit with status 2.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import DynpsnError
from .pipeline import (
    RunConfig,
    load_config,
    stage_build,
    stage_count,
    stage_evaluate,
    stage_featurize,
    stage_rank,
    stage_stats,
    stage_synth,
    stage_train_lr,
)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, help="worker processes for per-domain stages")
    p.add_argument("--relaxed-threshold", type=float, dest="relaxed_threshold")
    p.add_argument("--correlation", choices=["spearman", "pearson"])
    p.add_argument("--pca-scope", choices=["full", "train"], dest="pca_scope")
    p.add_argument("--pca-retain", type=float, dest="pca_retain")
    p.add_argument("--manifest")
    p.add_argument("--dataset-id", dest="dataset_id")
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-gap", type=int, dest="max_gap")
    p.add_argument("--folds", type=int)
    p.add_argument("--min-length", type=int, dest="min_length")
    p.add_argument("--class-floor", type=int, dest="class_floor")
    p.add_argument("--no-static", action="store_true",
                   help="skip the static-graphlet baseline")


def _config_from(args: argparse.Namespace) -> RunConfig:
    keys = ["out", "seed", "jobs", "relaxed_threshold", "correlation", "pca_scope",
            "pca_retain", "manifest", "dataset_id", "k", "threshold", "max_gap",
            "folds", "min_length", "class_floor"]
    overrides = {k: getattr(args, k, None) for k in keys}
    if getattr(args, "no_static", False):
        overrides["static_baseline"] = False
    return load_config(args.config, overrides)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="dynpsn",
        description="dynamic protein structure network classification pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus manifest")
    p.add_argument("--out", required=True, help="manifest path to write")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--per-class", type=int, default=30, dest="per_class")
    p.add_argument("--length-min", type=int, default=40, dest="length_min")
    p.add_argument("--length-max", type=int, default=80, dest="length_max")
    p.add_argument("--class-floor", type=int, default=30, dest="class_floor")

    for name, help_text in [
        ("build", "parse corpus, build networks, event streams and folds"),
        ("count", "enumerate orbit catalogues and count per-node orbits"),
        ("featurize", "column filter, correlation matrices, PCA features"),
        ("train-lr", "nested-CV one-vs-rest logistic regression"),
        ("evaluate", "misclassification rates from prediction files"),
        ("rank", "strict and relaxed competition ranking"),
        ("stats", "pairwise one-sided signed-rank tests"),
        ("report", "tables and SVG charts"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "evaluate":
            p.add_argument("--pred", action="append", default=[],
                           help="extra prediction files (repeatable)")
        if name in ("rank", "stats", "report"):
            p.add_argument("--rates", action="append", default=[],
                           help="rates.csv files to merge (repeatable)")
        if name == "report":
            p.add_argument("--metadata", action="append", default=[],
                           help="extra metadata files with method runtimes")

    p = sub.add_parser("oracle", help="verify counting against the explicit oracle")
    p.add_argument("--max-nodes", type=int, default=4, dest="max_nodes")
    p.add_argument("--max-events", type=int, default=6, dest="max_events")
    p.add_argument("--streams", type=int, default=20)
    p.add_argument("--stream-nodes", type=int, default=10, dest="stream_nodes")
    p.add_argument("--stream-events", type=int, default=14, dest="stream_events")
    p.add_argument("--seed", type=int, default=1)

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "synth":
            from pathlib import Path
            n = stage_synth(args.seed, args.classes, args.per_class,
                            (args.length_min, args.length_max), Path(args.out),
                            class_floor=args.class_floor)
            print(f"wrote {n} domains to {args.out}")
            return 0
        if args.command == "oracle":
            from .oracle import run_oracle
            report = run_oracle(max_nodes=args.max_nodes, max_events=args.max_events,
                                streams=args.streams, max_stream_nodes=args.stream_nodes,
                                max_stream_events=args.stream_events, seed=args.seed)
            for line in report.lines():
                print(line)
            return 0 if report.ok else 1

        config = _config_from(args)
        if args.command == "build":
            info = stage_build(config)
            print(f"kept {info['kept']} domains"
                  + (f", dropped {len(info['dropped'])} disconnected" if info["dropped"] else ""))
        elif args.command == "count":
            info = stage_count(config)
            print(f"counted {info['counted']} domains over {info['orbits']} orbits")
        elif args.command == "featurize":
            info = stage_featurize(config)
            print("featurized: " + ", ".join(
                f"{k}: {v.get('kept_columns')} columns" for k, v in info.items()))
        elif args.command == "train-lr":
            info = stage_train_lr(config)
            print("trained: " + ", ".join(sorted(info)))
        elif args.command == "evaluate":
            info = stage_evaluate(config, extra_predictions=args.pred)
            print("evaluated methods: " + ", ".join(sorted(set(info["methods"]))))
        elif args.command == "rank":
            info = stage_rank(config, rates_paths=args.rates)
            print(f"ranked {len(info['methods'])} methods over {info['datasets']} dataset(s)")
        elif args.command == "stats":
            info = stage_stats(config, rates_paths=args.rates)
            print(f"tested {info['comparisons']} ordered pairs over "
                  f"{info['datasets']} dataset(s)")
        elif args.command == "report":
            from .reporting import stage_report
            info = stage_report(config, rates_paths=args.rates,
                                metadata_paths=args.metadata)
            print("report files: " + ", ".join(info["produced"]))
        return 0
    except DynpsnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
