"""Benchmarking protocol: stratified folds, misclassification, competition
ranking, one-sided paired signed-rank tests with Bonferroni correction,
the majority-class baseline, and runtime summaries.

Fold assignment uses the documented SplitMix64 shuffle (see _rng) so folds
regenerate identically from a seed anywhere. The signed-rank test is exact
(dynamic program over the realized rank multiset) up to 25 effective pairs
and uses a tie- and continuity-corrected normal approximation beyond.
"""

from __future__ import annotations

import csv
import math
import os
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import DynpsnError
from ._rng import SplitMix64


class EvaluationError(DynpsnError):
    pass


class StratificationError(DynpsnError):
    pass


# ---------------------------------------------------------------------------
# folds

@dataclass
class FoldAssignment:
    fold_of: dict[str, int]
    folds: int
    seed: int


def stratified_folds(labels: dict[str, str], folds: int, seed: int) -> FoldAssignment:
    """Per class: shuffle the id-sorted members with one SplitMix64 stream
    (classes visited in label order), then deal round-robin over folds."""
    if folds < 2:
        raise StratificationError(f"need at least 2 folds, got {folds}")
    by_class: dict[str, list[str]] = {}
    for did, lab in labels.items():
        by_class.setdefault(lab, []).append(did)
    for lab, members in sorted(by_class.items()):
        if len(members) < folds:
            raise StratificationError(
                f"class {lab!r} has {len(members)} members, fewer than {folds} folds")
    rng = SplitMix64(seed)
    fold_of: dict[str, int] = {}
    for lab in sorted(by_class):
        members = sorted(by_class[lab])
        rng.shuffle(members)
        for i, did in enumerate(members):
            fold_of[did] = i % folds
    return FoldAssignment(fold_of=fold_of, folds=folds, seed=seed)


def write_folds(assignment: FoldAssignment, path: str | Path) -> None:
    lines = [f"{did},{fold}" for did, fold in sorted(assignment.fold_of.items())]
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_folds(path: str | Path, folds: int | None = None, seed: int = 0) -> FoldAssignment:
    fold_of = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if not ln.strip():
            continue
        did, f = ln.rsplit(",", 1)
        fold_of[did] = int(f)
    if not fold_of:
        raise EvaluationError(f"{path}: empty folds file")
    return FoldAssignment(fold_of=fold_of,
                          folds=folds if folds else max(fold_of.values()) + 1,
                          seed=seed)


# ---------------------------------------------------------------------------
# predictions

@dataclass
class PredictionRow:
    domain_id: str
    fold: int
    true_label: str
    predicted_label: str
    scores: list[float] = field(default_factory=list)


@dataclass
class PredictionSet:
    method_id: str
    dataset_id: str
    rows: list[PredictionRow]
    runtime_seconds: float = 0.0


PRED_HEADER = ["dataset_id", "method_id", "domain_id", "fold",
               "true_label", "predicted_label"]


def write_predictions(preds: PredictionSet, path: str | Path) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        nscores = len(preds.rows[0].scores) if preds.rows else 0
        wr.writerow(PRED_HEADER + [f"score_{i}" for i in range(nscores)])
        for r in sorted(preds.rows, key=lambda r: r.domain_id):
            wr.writerow([preds.dataset_id, preds.method_id, r.domain_id, r.fold,
                         r.true_label, r.predicted_label]
                        + [format(s, ".17g") for s in r.scores])
    os.replace(tmp, path)


def read_predictions(path: str | Path) -> PredictionSet:
    with open(path, encoding="utf-8", newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd, None)
        if header is None or header[:6] != PRED_HEADER:
            raise EvaluationError(f"{path}: bad predictions header")
        rows = []
        dataset_id = method_id = None
        for rec in rd:
            if not rec:
                continue
            dataset_id, method_id = rec[0], rec[1]
            rows.append(PredictionRow(domain_id=rec[2], fold=int(rec[3]),
                                      true_label=rec[4], predicted_label=rec[5],
                                      scores=[float(x) for x in rec[6:]]))
    if not rows:
        raise EvaluationError(f"{path}: no prediction rows")
    return PredictionSet(method_id=method_id, dataset_id=dataset_id, rows=rows)


def misclassification(preds: PredictionSet, mode: str = "aggregate",
                      expected_ids: set[str] | None = None) -> tuple[float, dict[int, float]]:
    """Aggregate (pooled) or average (mean of per-fold) misclassification."""
    seen = set()
    for r in preds.rows:
        if r.domain_id in seen:
            raise EvaluationError(f"duplicate prediction for {r.domain_id}")
        seen.add(r.domain_id)
    if expected_ids is not None and seen != expected_ids:
        missing = sorted(expected_ids - seen)[:5]
        extra = sorted(seen - expected_ids)[:5]
        raise EvaluationError(f"incomplete predictions: missing={missing} extra={extra}")
    per_fold_wrong: dict[int, int] = {}
    per_fold_total: dict[int, int] = {}
    for r in preds.rows:
        per_fold_total[r.fold] = per_fold_total.get(r.fold, 0) + 1
        if r.predicted_label != r.true_label:
            per_fold_wrong[r.fold] = per_fold_wrong.get(r.fold, 0) + 1
    fold_rates = {f: per_fold_wrong.get(f, 0) / per_fold_total[f]
                  for f in sorted(per_fold_total)}
    if mode == "aggregate":
        rate = sum(per_fold_wrong.values()) / len(preds.rows)
    elif mode == "average":
        rate = sum(fold_rates.values()) / len(fold_rates)
    else:
        raise EvaluationError(f"unknown mode {mode!r}")
    return rate, fold_rates


def majority_baseline(labels: list[str]) -> float:
    """Misclassification of always predicting the largest class."""
    if not labels:
        raise EvaluationError("empty label list")
    counts: dict[str, int] = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return 1.0 - max(counts.values()) / len(labels)


# ---------------------------------------------------------------------------
# competition ranking

@dataclass
class RankTable:
    policy: str                                   # "strict" | "relaxed"
    threshold: float
    ranks: dict[str, dict[str, int]]              # dataset -> method -> rank
    rank1_pct: dict[str, float]                   # method -> % of datasets at rank 1
    rank1_absolute_pct: dict[str, float]
    rank1_tied_pct: dict[str, float]


def rank_methods(rates: dict[str, dict[str, float]], policy: str = "strict",
                 threshold: float = 0.02) -> RankTable:
    """Competition ranks per dataset. Strict ties need exactly equal rates;
    relaxed rank-1 goes to every method within threshold of the dataset
    minimum (remaining methods keep strict competition numbering below the
    leading group)."""
    if policy not in ("strict", "relaxed"):
        raise EvaluationError(f"unknown ranking policy {policy!r}")
    ranks: dict[str, dict[str, int]] = {}
    rank1_hits: dict[str, int] = {}
    rank1_abs: dict[str, int] = {}
    rank1_tied: dict[str, int] = {}
    datasets = sorted(rates)
    for ds in datasets:
        method_rates = rates[ds]
        if len(method_rates) < 2:
            raise EvaluationError(f"dataset {ds}: need at least 2 methods to rank")
        ds_ranks: dict[str, int] = {}
        if policy == "strict":
            for m, r in method_rates.items():
                ds_ranks[m] = 1 + sum(1 for r2 in method_rates.values() if r2 < r)
        else:
            cutoff = min(method_rates.values()) + threshold
            leaders = {m for m, r in method_rates.items() if r <= cutoff}
            for m in leaders:
                ds_ranks[m] = 1
            rest = {m: r for m, r in method_rates.items() if m not in leaders}
            for m, r in rest.items():
                ds_ranks[m] = 1 + len(leaders) + sum(1 for r2 in rest.values() if r2 < r)
        ranks[ds] = ds_ranks
        top = [m for m, rk in ds_ranks.items() if rk == 1]
        for m in top:
            rank1_hits[m] = rank1_hits.get(m, 0) + 1
            if len(top) == 1:
                rank1_abs[m] = rank1_abs.get(m, 0) + 1
            else:
                rank1_tied[m] = rank1_tied.get(m, 0) + 1
    nds = len(datasets)
    methods = sorted({m for ds in datasets for m in rates[ds]})
    return RankTable(
        policy=policy, threshold=threshold if policy == "relaxed" else 0.0,
        ranks=ranks,
        rank1_pct={m: 100.0 * rank1_hits.get(m, 0) / nds for m in methods},
        rank1_absolute_pct={m: 100.0 * rank1_abs.get(m, 0) / nds for m in methods},
        rank1_tied_pct={m: 100.0 * rank1_tied.get(m, 0) / nds for m in methods},
    )


# ---------------------------------------------------------------------------
# one-sided paired signed-rank test

@dataclass
class StatResult:
    method_x: str
    method_y: str
    p_value: float
    q_value: float
    n_effective: int
    comparisons: int
    undefined: bool = False
    zeros_discarded: int = 0


EXACT_LIMIT = 25


def _signed_ranks(diffs: list[float]) -> tuple[list[float], list[int]]:
    """Average ranks of |d| (zeros removed) and the tie group sizes."""
    absd = sorted((abs(d), i) for i, d in enumerate(diffs))
    ranks = [0.0] * len(diffs)
    ties = []
    i = 0
    while i < len(absd):
        j = i
        while j + 1 < len(absd) and absd[j + 1][0] == absd[i][0]:
            j += 1
        avg = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[absd[k][1]] = avg
        ties.append(j - i + 1)
        i = j + 1
    return ranks, ties


def _exact_p_leq(ranks: list[float], w_obs: float) -> float:
    """P(W+ <= w_obs) when each rank joins W+ with probability 1/2.

    Dynamic program over doubled ranks (average ranks are half-integers).
    """
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    counts = [0] * (total + 1)
    counts[0] = 1
    for r in doubled:
        for s in range(total - r, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
    cutoff = int(math.floor(2 * w_obs + 1e-9))
    favorable = sum(counts[: min(cutoff, total) + 1])
    return favorable / (1 << len(ranks))


def _norm_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def wilcoxon_one_sided(x_rates: list[float], y_rates: list[float],
                       comparisons: int = 1, method_x: str = "x",
                       method_y: str = "y") -> StatResult:
    """Test whether x tends to be smaller than y over paired observations.

    Zero differences are discarded; W+ sums the ranks of positive
    differences, small W+ favoring x. q = min(1, p * comparisons).
    """
    if len(x_rates) != len(y_rates):
        raise EvaluationError("paired vectors must have equal length")
    if len(x_rates) < 5:
        raise EvaluationError("need at least 5 paired observations")
    diffs = [float(a) - float(b) for a, b in zip(x_rates, y_rates)]
    zeros = sum(1 for d in diffs if d == 0.0)
    diffs = [d for d in diffs if d != 0.0]
    n = len(diffs)
    if n == 0:
        return StatResult(method_x=method_x, method_y=method_y, p_value=1.0,
                          q_value=1.0, n_effective=0, comparisons=comparisons,
                          undefined=True, zeros_discarded=zeros)
    ranks, ties = _signed_ranks(diffs)
    w_plus = sum(r for r, d in zip(ranks, diffs) if d > 0)
    if n <= EXACT_LIMIT:
        p = _exact_p_leq(ranks, w_plus)
    else:
        mean = n * (n + 1) / 4.0
        tie_term = sum(t ** 3 - t for t in ties) / 48.0
        var = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
        if var <= 0:
            p = 1.0
        else:
            z = (w_plus - mean + 0.5) / math.sqrt(var)
            p = _norm_cdf(z)
    p = min(max(p, math.ulp(0.0)), 1.0)
    return StatResult(method_x=method_x, method_y=method_y, p_value=p,
                      q_value=min(1.0, p * comparisons), n_effective=n,
                      comparisons=comparisons, zeros_discarded=zeros)


# ---------------------------------------------------------------------------
# runtimes

@dataclass
class RuntimeSummary:
    median_seconds: float
    mean_seconds: float
    stdev_seconds: float
    n: int
    single_value: bool = False

    @property
    def median_hours(self) -> float:
        return self.median_seconds / 3600.0

    @property
    def mean_hours(self) -> float:
        return self.mean_seconds / 3600.0


def runtime_summary(seconds: list[float]) -> RuntimeSummary:
    """Median, mean and sample standard deviation (n-1); a single value
    reports stdev 0 with a flag."""
    if not seconds:
        raise EvaluationError("no runtimes to summarize")
    if len(seconds) == 1:
        return RuntimeSummary(median_seconds=seconds[0], mean_seconds=seconds[0],
                              stdev_seconds=0.0, n=1, single_value=True)
    return RuntimeSummary(median_seconds=statistics.median(seconds),
                          mean_seconds=statistics.fmean(seconds),
                          stdev_seconds=statistics.stdev(seconds),
                          n=len(seconds))
