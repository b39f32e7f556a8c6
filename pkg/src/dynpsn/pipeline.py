"""Stage orchestration: configuration, file layout, and the build/count/
featurize/train/evaluate/rank/stats stages behind the CLI.

Every stage reads and writes only documented file formats, writes outputs
atomically (temp file then rename), and is idempotent: identical inputs
reproduce byte-identical artifacts. Wall-clock measurements never enter
stage outputs; they live in metadata/<stage>.json alongside a config
snapshot and input hashes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import DynpsnError, __version__
from . import structure_io as sio
from .evaluation import (
    FoldAssignment,
    PredictionRow,
    PredictionSet,
    majority_baseline,
    misclassification,
    rank_methods,
    read_folds,
    read_predictions,
    stratified_folds,
    wilcoxon_one_sided,
    write_folds,
    write_predictions,
)
from .features import (
    build_gcm_vectors,
    fit_column_filter,
    fit_pca,
    read_feature_matrix,
    write_column_filter,
    write_feature_matrix,
    write_pca_model,
)
from .graphlets import (
    count_dynamic_orbits,
    count_static_orbits,
    enumerate_dynamic_orbits,
    enumerate_static_orbits,
    read_gdvm,
    read_orbit_table,
    write_gdvm,
    write_orbit_table,
)
from .logreg import DEFAULT_L2_GRID, train_ovr, write_ovr_model
from .psn import (
    build_dynamic_psn,
    check_connectivity,
    derive_event_stream,
    read_event_stream,
    write_event_stream,
)
from ._rng import derive_seed

import logging

log = logging.getLogger(__name__)


class DependencyError(DynpsnError):
    pass


@dataclass
class RunConfig:
    manifest: str | None = None
    out: str = "out"
    dataset_id: str = "dataset"
    k: int = 5
    threshold: float = 6.0
    max_nodes: int = 4
    max_events: int = 6
    max_gap: int | None = None
    correlation: str = "spearman"
    pca_retain: float = 0.90
    pca_scope: str = "full"          # "full" reproduces the protocol; "train" is leakage-free
    l2_grid: list[float] = field(default_factory=lambda: list(DEFAULT_L2_GRID))
    folds: int = 5
    seed: int = 7
    relaxed_threshold: float = 0.02
    min_length: int = 30
    class_floor: int = 30
    static_baseline: bool = True
    jobs: int = 1

    def validate(self) -> None:
        checks = [
            (self.k >= 1, "k must be >= 1"),
            (self.threshold > 0, "threshold must be positive"),
            (self.max_nodes >= 2, "max_nodes must be >= 2"),
            (self.max_events >= 1, "max_events must be >= 1"),
            (self.correlation in ("spearman", "pearson"), "correlation must be spearman|pearson"),
            (0 < self.pca_retain <= 1, "pca_retain must be in (0, 1]"),
            (self.pca_scope in ("full", "train"), "pca_scope must be full|train"),
            (self.folds >= 2, "folds must be >= 2"),
            (all(v > 0 for v in self.l2_grid), "l2 grid values must be positive"),
            (0 <= self.relaxed_threshold <= 1, "relaxed_threshold must be in [0, 1]"),
            (self.jobs >= 1, "jobs must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise DynpsnError(f"bad config: {msg}")

    def snapshot(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Precedence: CLI flags > config file > defaults."""
    base: dict = {}
    if path:
        try:
            base = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise DynpsnError(f"cannot read config {path}: {exc}") from None
    merged = {**base, **{k: v for k, v in overrides.items() if v is not None}}
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise DynpsnError(f"unknown config keys: {sorted(unknown)}")
    cfg = RunConfig(**merged)
    cfg.validate()
    return cfg


# ---------------------------------------------------------------------------
# layout + metadata

class Layout:
    def __init__(self, out: str | Path):
        self.out = Path(out)

    @property
    def domains(self): return self.out / "domains.jsonl"
    @property
    def labels(self): return self.out / "labels.csv"
    @property
    def folds(self): return self.out / "folds.csv"
    @property
    def events_dir(self): return self.out / "events"
    @property
    def orbits_dynamic(self): return self.out / "orbits_dynamic.txt"
    @property
    def orbits_static(self): return self.out / "orbits_static.txt"
    @property
    def dgdvm_dir(self): return self.out / "dgdvm"
    @property
    def sgdvm_dir(self): return self.out / "sgdvm"
    @property
    def predictions_dir(self): return self.out / "predictions"
    @property
    def models_dir(self): return self.out / "models"
    @property
    def rates(self): return self.out / "rates.csv"
    @property
    def fold_rates(self): return self.out / "fold_rates.csv"
    @property
    def results(self): return self.out / "results.txt"
    @property
    def rank_summary(self): return self.out / "rank_summary.csv"
    @property
    def qvalues(self): return self.out / "qvalues.csv"
    @property
    def stats(self): return self.out / "stats.csv"
    @property
    def report_dir(self): return self.out / "report"
    @property
    def metadata_dir(self): return self.out / "metadata"

    def feat(self, kind: str): return self.out / f"features_{kind}.feat"
    def gcmvec(self, kind: str): return self.out / f"gcmvec_{kind}.feat"
    def cols(self, kind: str): return self.out / f"cols_{kind}.txt"
    def pca(self, kind: str): return self.out / f"pca_{kind}.txt"
    def rank_table(self, policy: str): return self.out / f"rank_{policy}.csv"


def _hash_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_metadata(layout: Layout, stage: str, config: RunConfig,
                   timings: dict[str, float], input_paths: list[Path],
                   extra: dict | None = None) -> None:
    layout.metadata_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "stage": stage,
        "tool_version": __version__,
        "config": config.snapshot(),
        "wall_clock_seconds": timings,
        "input_hashes": {str(p): _hash_file(p) for p in input_paths if p.is_file()},
    }
    if extra:
        meta.update(extra)
    path = layout.metadata_dir / f"{stage}.json"
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise DependencyError(f"missing {path}; run the '{produced_by}' stage first")
    return path


def _write_text(path: Path, text: str) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# synth

def stage_synth(seed: int, classes: int, per_class: int, length_range: tuple[int, int],
                manifest_out: Path, class_floor: int = 30) -> int:
    domains = sio.generate_synthetic_corpus(seed, classes, per_class, length_range,
                                            class_floor=class_floor)
    man = sio.corpus_to_manifest(domains)
    manifest_out.parent.mkdir(parents=True, exist_ok=True)
    sio.write_manifest(man, manifest_out)
    return len(domains)


# ---------------------------------------------------------------------------
# build

def stage_build(config: RunConfig) -> dict:
    if not config.manifest:
        raise DynpsnError("build needs a corpus manifest (config 'manifest' or --manifest)")
    t0 = time.perf_counter()
    layout = Layout(config.out)
    layout.out.mkdir(parents=True, exist_ok=True)
    layout.events_dir.mkdir(exist_ok=True)
    manifest = sio.read_manifest(config.manifest)
    domains = sio.load_corpus(manifest, min_length=config.min_length,
                              class_floor=config.class_floor)
    kept = []
    dropped = []
    t_psn = 0.0
    for dom in domains:
        t1 = time.perf_counter()
        dpsn = build_dynamic_psn(dom, k=config.k, threshold=config.threshold)
        if not check_connectivity(dpsn.final()):
            dropped.append(dom.id)
            log.warning("dropping domain %s: disconnected network", dom.id)
            t_psn += time.perf_counter() - t1
            continue
        stream = derive_event_stream(dpsn, domain_id=dom.id)
        write_event_stream(stream, layout.events_dir / f"{dom.id}.events")
        kept.append(dom)
        t_psn += time.perf_counter() - t1
    if not kept:
        raise DynpsnError("no domains left after connectivity filtering")
    sio.write_domains(kept, layout.domains)
    _write_text(layout.labels, "".join(f"{d.id},{d.label}\n" for d in kept))
    assignment = stratified_folds({d.id: d.label for d in kept}, config.folds, config.seed)
    write_folds(assignment, layout.folds)
    write_metadata(layout, "build", config,
                   {"total": time.perf_counter() - t0, "psn_construction": t_psn},
                   [Path(config.manifest)],
                   extra={"domains_kept": len(kept), "domains_dropped_disconnected": dropped})
    return {"kept": len(kept), "dropped": dropped}


# ---------------------------------------------------------------------------
# count

_WORKER_CACHE: dict = {}


def _count_one(args) -> str:
    (events_path, orbits_dyn_path, orbits_sta_path, dgdvm_path, sgdvm_path, max_gap) = args
    key = (orbits_dyn_path, orbits_sta_path)
    tables = _WORKER_CACHE.get(key)
    if tables is None:
        dyn = read_orbit_table(orbits_dyn_path)
        sta = read_orbit_table(orbits_sta_path) if orbits_sta_path else None
        tables = (dyn, sta)
        _WORKER_CACHE[key] = tables
    dyn, sta = tables
    stream = read_event_stream(events_path)
    gdvm = count_dynamic_orbits(stream, dyn, max_gap=max_gap)
    write_gdvm(gdvm, dgdvm_path)
    if sta is not None:
        from .psn import rebuild_final_snapshot
        psn = rebuild_final_snapshot(stream)
        sg = count_static_orbits(psn, sta)
        sg.domain_id = stream.domain_id
        write_gdvm(sg, sgdvm_path)
    return stream.domain_id


def stage_count(config: RunConfig) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    _require(layout.events_dir, "build")
    _require(layout.domains, "build")
    event_files = sorted(layout.events_dir.glob("*.events"))
    if not event_files:
        raise DependencyError(f"no event streams under {layout.events_dir}; run 'build' first")
    dyn_table = enumerate_dynamic_orbits(config.max_nodes, config.max_events)
    write_orbit_table(dyn_table, layout.orbits_dynamic)
    layout.dgdvm_dir.mkdir(exist_ok=True)
    sta_path = None
    if config.static_baseline:
        sta_table = enumerate_static_orbits(min(config.max_nodes, 4))
        write_orbit_table(sta_table, layout.orbits_static)
        layout.sgdvm_dir.mkdir(exist_ok=True)
        sta_path = str(layout.orbits_static)
    jobs = []
    for ep in event_files:
        did = ep.stem
        jobs.append((str(ep), str(layout.orbits_dynamic), sta_path,
                     str(layout.dgdvm_dir / f"{did}.dgdvm"),
                     str(layout.sgdvm_dir / f"{did}.dgdvm"), config.max_gap))
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            done = list(pool.map(_count_one, jobs))
    else:
        done = [_count_one(j) for j in jobs]
    write_metadata(layout, "count", config, {"total": time.perf_counter() - t0},
                   [layout.orbits_dynamic] + [Path(j[0]) for j in jobs],
                   extra={"domains_counted": len(done),
                          "dynamic_orbits": dyn_table.total_orbits})
    return {"counted": len(done), "orbits": dyn_table.total_orbits}


# ---------------------------------------------------------------------------
# featurize

def _load_gdvms(directory: Path) -> dict[str, np.ndarray]:
    out = {}
    for path in sorted(directory.glob("*.dgdvm")):
        g = read_gdvm(path)
        out[g.domain_id] = g.counts
    if not out:
        raise DependencyError(f"no count matrices under {directory}; run 'count' first")
    return out


def _featurize_kind(layout: Layout, config: RunConfig, kind: str, directory: Path) -> dict:
    gdvms = _load_gdvms(directory)
    column_filter = fit_column_filter(gdvms.values(), source=config.dataset_id)
    write_column_filter(column_filter, layout.cols(kind))
    ids, vectors = build_gcm_vectors(gdvms, column_filter, method=config.correlation)
    info = {"kept_columns": len(column_filter.kept_indices),
            "vector_length": vectors.shape[1]}
    if config.pca_scope == "full":
        pca = fit_pca(vectors, retain=config.pca_retain)
        write_pca_model(pca, layout.pca(kind))
        write_feature_matrix(ids, pca.transform(vectors), layout.feat(kind))
        info["pca_components"] = pca.d
    else:
        # leakage-free mode: PCA happens per training fold inside train-lr
        write_feature_matrix(ids, vectors, layout.gcmvec(kind))
    return info


def stage_featurize(config: RunConfig) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    _require(layout.dgdvm_dir, "count")
    info = {"dynamic": _featurize_kind(layout, config, "dynamic", layout.dgdvm_dir)}
    if config.static_baseline:
        _require(layout.sgdvm_dir, "count")
        info["static"] = _featurize_kind(layout, config, "static", layout.sgdvm_dir)
    write_metadata(layout, "featurize", config, {"total": time.perf_counter() - t0},
                   [layout.orbits_dynamic], extra=info)
    return info


# ---------------------------------------------------------------------------
# train-lr

def _read_labels(path: Path) -> dict[str, str]:
    labels = {}
    for ln in path.read_text(encoding="utf-8").splitlines():
        if ln.strip():
            did, lab = ln.rsplit(",", 1)
            labels[did] = lab
    return labels


def _train_lr_kind(layout: Layout, config: RunConfig, kind: str,
                   labels: dict[str, str], assignment: FoldAssignment) -> tuple[PredictionSet, dict]:
    scope = config.pca_scope
    if scope == "full":
        ids, X = read_feature_matrix(_require(layout.feat(kind), "featurize"))
    else:
        ids, X = read_feature_matrix(_require(layout.gcmvec(kind), "featurize"))
    index_of = {did: i for i, did in enumerate(ids)}
    if set(ids) != set(labels):
        raise DynpsnError(f"feature matrix ids do not match labels ({kind})")
    rows = []
    chosen = {}
    layout.models_dir.mkdir(exist_ok=True)
    for f in range(assignment.folds):
        train_ids = sorted(d for d in ids if assignment.fold_of[d] != f)
        test_ids = sorted(d for d in ids if assignment.fold_of[d] == f)
        Xtr = X[[index_of[d] for d in train_ids]]
        Xte = X[[index_of[d] for d in test_ids]]
        if scope == "train":
            pca = fit_pca(Xtr, retain=config.pca_retain)
            Xtr = pca.transform(Xtr)
            Xte = pca.transform(Xte)
        model, l2 = train_ovr(Xtr, [labels[d] for d in train_ids],
                              l2_grid=config.l2_grid, inner_folds=config.folds,
                              seed=derive_seed(config.seed, f))
        chosen[f] = l2
        write_ovr_model(model, layout.models_dir / f"lr_{kind}_fold{f}.txt")
        picks, scores = model.predict_many(Xte)
        for did, pick, srow in zip(test_ids, picks, scores):
            rows.append(PredictionRow(domain_id=did, fold=f, true_label=labels[did],
                                      predicted_label=pick, scores=list(srow)))
    preds = PredictionSet(method_id=f"{kind}-lr", dataset_id=config.dataset_id, rows=rows)
    return preds, {"chosen_l2_per_fold": chosen}


def stage_train_lr(config: RunConfig) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    labels = _read_labels(_require(layout.labels, "build"))
    assignment = read_folds(_require(layout.folds, "build"), folds=config.folds)
    layout.predictions_dir.mkdir(exist_ok=True)
    info: dict = {}
    timings: dict[str, float] = {}
    kinds = ["dynamic"] + (["static"] if config.static_baseline else [])
    for kind in kinds:
        t1 = time.perf_counter()
        preds, extra = _train_lr_kind(layout, config, kind, labels, assignment)
        timings[f"{kind}-lr"] = time.perf_counter() - t1
        preds.runtime_seconds = timings[f"{kind}-lr"]
        write_predictions(preds, layout.predictions_dir / f"{kind}-lr.csv")
        info[kind] = extra
    timings["total"] = time.perf_counter() - t0
    write_metadata(layout, "train_lr", config, timings,
                   [layout.labels, layout.folds],
                   extra={"method_runtimes": {f"{k}-lr": timings[f"{k}-lr"] for k in kinds},
                          **info})
    return info


# ---------------------------------------------------------------------------
# evaluate

def stage_evaluate(config: RunConfig, extra_predictions: list[str] = ()) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    labels = _read_labels(_require(layout.labels, "build"))
    assignment = read_folds(_require(layout.folds, "build"), folds=config.folds)
    pred_paths = sorted(_require(layout.predictions_dir, "train-lr").glob("*.csv"))
    pred_paths += [Path(p) for p in extra_predictions]
    if not pred_paths:
        raise DependencyError("no prediction files; run 'train-lr' first")
    expected = set(labels)
    rate_rows = []
    fold_rows = []
    for path in pred_paths:
        preds = read_predictions(path)
        for r in preds.rows:
            if r.domain_id not in labels:
                raise DynpsnError(f"{path}: unknown domain {r.domain_id}")
            if labels[r.domain_id] != r.true_label:
                raise DynpsnError(f"{path}: true label mismatch for {r.domain_id}")
            if assignment.fold_of.get(r.domain_id) != r.fold:
                raise DynpsnError(f"{path}: fold mismatch for {r.domain_id}")
        agg, per_fold = misclassification(preds, "aggregate", expected_ids=expected)
        avg, _ = misclassification(preds, "average")
        rate_rows.append((preds.dataset_id, preds.method_id, agg, avg))
        for f, rate in per_fold.items():
            fold_rows.append((preds.dataset_id, preds.method_id, f, rate))
    maj = majority_baseline(list(labels.values()))
    rate_rows.append((config.dataset_id, "majority", maj, maj))
    rate_rows.sort(key=lambda r: (r[0], r[1]))
    fold_rows.sort(key=lambda r: (r[0], r[1], r[2]))
    lines = ["dataset_id,method_id,aggregate,average"]
    lines += [f"{d},{m},{a:.17g},{v:.17g}" for d, m, a, v in rate_rows]
    _write_text(layout.rates, "\n".join(lines) + "\n")
    lines = ["dataset_id,method_id,fold,rate"]
    lines += [f"{d},{m},{f},{r:.17g}" for d, m, f, r in fold_rows]
    _write_text(layout.fold_rates, "\n".join(lines) + "\n")
    summary = ["misclassification rates (aggregate over all test folds)", ""]
    for d, m, a, v in rate_rows:
        summary.append(f"{d:24s} {m:20s} aggregate={a:.6f} average={v:.6f}")
    summary += ["", f"domains: {len(labels)}  classes: {len(set(labels.values()))}  "
                f"majority-class rate: {maj:.6f}"]
    _write_text(layout.results, "\n".join(summary) + "\n")
    write_metadata(layout, "evaluate", config, {"total": time.perf_counter() - t0},
                   [layout.labels, layout.folds] + list(pred_paths))
    return {"methods": [r[1] for r in rate_rows]}


# ---------------------------------------------------------------------------
# rank + stats

def read_rates(paths: list[Path]) -> dict[str, dict[str, float]]:
    rates: dict[str, dict[str, float]] = {}
    for path in paths:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if not lines or not lines[0].startswith("dataset_id,"):
            raise DynpsnError(f"{path}: bad rates header")
        for ln in lines[1:]:
            if not ln.strip():
                continue
            ds, m, agg, _avg = ln.split(",")
            rates.setdefault(ds, {})[m] = float(agg)
    if not rates:
        raise DynpsnError("no rate rows found")
    return rates


def stage_rank(config: RunConfig, rates_paths: list[str] = ()) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    layout.out.mkdir(parents=True, exist_ok=True)
    paths = [Path(p) for p in rates_paths] or [_require(layout.rates, "evaluate")]
    rates = read_rates(paths)
    out = {}
    for policy in ("strict", "relaxed"):
        table = rank_methods(rates, policy=policy, threshold=config.relaxed_threshold)
        lines = ["dataset_id,method_id,rank"]
        for ds in sorted(table.ranks):
            for m in sorted(table.ranks[ds]):
                lines.append(f"{ds},{m},{table.ranks[ds][m]}")
        _write_text(layout.rank_table(policy), "\n".join(lines) + "\n")
        out[policy] = table
    methods = sorted({m for ds in rates.values() for m in ds})
    lines = ["method_id,policy,rank1_pct,rank1_absolute_pct,rank1_tied_pct"]
    for policy, table in out.items():
        for m in methods:
            lines.append(f"{m},{policy},{table.rank1_pct[m]:.17g},"
                         f"{table.rank1_absolute_pct[m]:.17g},{table.rank1_tied_pct[m]:.17g}")
    _write_text(layout.rank_summary, "\n".join(lines) + "\n")
    write_metadata(layout, "rank", config, {"total": time.perf_counter() - t0}, paths)
    return {"methods": methods, "datasets": len(rates)}


def stage_stats(config: RunConfig, rates_paths: list[str] = ()) -> dict:
    t0 = time.perf_counter()
    layout = Layout(config.out)
    layout.out.mkdir(parents=True, exist_ok=True)
    paths = [Path(p) for p in rates_paths] or [_require(layout.rates, "evaluate")]
    rates = read_rates(paths)
    datasets = sorted(rates)
    methods = sorted({m for ds in rates.values() for m in ds})
    common = [m for m in methods if all(m in rates[ds] for ds in datasets)]
    pairs = [(a, b) for a in common for b in common if a != b]
    comparisons = len(pairs)
    results = []
    for a, b in pairs:
        xs = [rates[ds][a] for ds in datasets]
        ys = [rates[ds][b] for ds in datasets]
        results.append(wilcoxon_one_sided(xs, ys, comparisons=comparisons,
                                          method_x=a, method_y=b))
    lines = ["method_x,method_y,p_value,q_value,n_effective,zeros_discarded,undefined"]
    for r in results:
        lines.append(f"{r.method_x},{r.method_y},{r.p_value:.17g},{r.q_value:.17g},"
                     f"{r.n_effective},{r.zeros_discarded},{int(r.undefined)}")
    _write_text(layout.stats, "\n".join(lines) + "\n")
    # square q-value matrix: cell (row, col) tests row better than col
    qmap = {(r.method_x, r.method_y): r.q_value for r in results}
    lines = ["," + ",".join(common)]
    for a in common:
        cells = []
        for b in common:
            cells.append("" if a == b else f"{qmap[(a, b)]:.17g}")
        lines.append(a + "," + ",".join(cells))
    _write_text(layout.qvalues, "\n".join(lines) + "\n")
    write_metadata(layout, "stats", config, {"total": time.perf_counter() - t0}, paths,
                   extra={"bonferroni_divisor": comparisons,
                          "pairs_tested": [[a, b] for a, b in pairs]})
    return {"comparisons": comparisons, "datasets": len(datasets)}
