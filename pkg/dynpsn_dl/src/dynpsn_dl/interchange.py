"""Readers and writers for the pipeline's interchange formats.

This package talks to the feature pipeline exclusively through these files:
count matrices (DGDVM v1), event streams (EVENTS v1 + COUNTS), the folds
and labels tables, and the predictions CSV it emits back. Implemented here
from the format documentation, with no imports from the pipeline package.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import InterchangeError


@dataclass
class CountMatrix:
    domain_id: str
    counts: np.ndarray  # (n, cols) int64


@dataclass
class Stream:
    domain_id: str
    n: int
    T: int
    events: list[tuple[int, int, int]]  # (u, v, t)
    node_counts: list[int]


def read_gdvm(path: str | Path) -> CountMatrix:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("DGDVM v1 "):
        raise InterchangeError(f"{path}: missing DGDVM v1 header")
    _, _, domain_id, rows, cols = lines[0].split()
    rows, cols = int(rows), int(cols)
    if len(lines) != rows + 1:
        raise InterchangeError(f"{path}: expected {rows} rows")
    counts = np.zeros((rows, cols), dtype=np.int64)
    for i, ln in enumerate(lines[1:]):
        vals = ln.split()
        if len(vals) != cols:
            raise InterchangeError(f"{path}: row {i} has {len(vals)} values")
        counts[i] = [int(x) for x in vals]
    return CountMatrix(domain_id=domain_id, counts=counts)


def write_gdvm(m: CountMatrix, path: str | Path) -> None:
    rows, cols = m.counts.shape
    lines = [f"DGDVM v1 {m.domain_id} {rows} {cols}"]
    lines.extend(" ".join(str(int(x)) for x in row) for row in m.counts)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_event_stream(path: str | Path) -> Stream:
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    if not lines or not lines[0].startswith("EVENTS v1 "):
        raise InterchangeError(f"{path}: missing EVENTS v1 header")
    _, _, domain_id, n, T, m = lines[0].split()
    n, T, m = int(n), int(T), int(m)
    if len(lines) != m + 2 or not lines[-1].startswith("COUNTS"):
        raise InterchangeError(f"{path}: expected {m} events plus a COUNTS line")
    events = []
    for ln in lines[1:1 + m]:
        t, u, v = (int(x) for x in ln.split())
        events.append((u, v, t))
    node_counts = [int(x) for x in lines[-1].split()[1:]]
    if len(node_counts) != T:
        raise InterchangeError(f"{path}: COUNTS length != T")
    return Stream(domain_id=domain_id, n=n, T=T, events=events, node_counts=node_counts)


def write_event_stream(s: Stream, path: str | Path) -> None:
    lines = [f"EVENTS v1 {s.domain_id} {s.n} {s.T} {len(s.events)}"]
    lines.extend(f"{t} {u} {v}" for (u, v, t) in s.events)
    lines.append("COUNTS " + " ".join(str(c) for c in s.node_counts))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def snapshot_adjacencies(stream: Stream) -> list[np.ndarray]:
    """Per-snapshot adjacency over the first node_counts[s] nodes."""
    out = []
    for s in range(1, stream.T + 1):
        size = stream.node_counts[s - 1]
        A = np.zeros((size, size), dtype=np.float32)
        for (u, v, t) in stream.events:
            if t <= s and u < size and v < size:
                A[u, v] = A[v, u] = 1.0
        out.append(A)
    return out


def read_labels(path: str | Path) -> dict[str, str]:
    labels = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if ln.strip():
            did, lab = ln.rsplit(",", 1)
            labels[did] = lab
    if not labels:
        raise InterchangeError(f"{path}: empty labels table")
    return labels


def read_folds(path: str | Path) -> dict[str, int]:
    folds = {}
    for ln in Path(path).read_text(encoding="utf-8").splitlines():
        if ln.strip():
            did, f = ln.rsplit(",", 1)
            folds[did] = int(f)
    if not folds:
        raise InterchangeError(f"{path}: empty folds table")
    return folds


@dataclass
class Prediction:
    domain_id: str
    fold: int
    true_label: str
    predicted_label: str
    scores: list[float] = field(default_factory=list)


PRED_HEADER = ["dataset_id", "method_id", "domain_id", "fold",
               "true_label", "predicted_label"]


def write_predictions(dataset_id: str, method_id: str, rows: list[Prediction],
                      path: str | Path) -> None:
    """Emit the pipeline's predictions CSV (validated before write)."""
    if not rows:
        raise InterchangeError("refusing to write an empty predictions file")
    nscores = len(rows[0].scores)
    for r in rows:
        if len(r.scores) != nscores:
            raise InterchangeError("inconsistent score list lengths")
        if not r.true_label or not r.predicted_label:
            raise InterchangeError("empty label in prediction row")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(PRED_HEADER + [f"score_{i}" for i in range(nscores)])
        for r in sorted(rows, key=lambda r: r.domain_id):
            wr.writerow([dataset_id, method_id, r.domain_id, r.fold,
                         r.true_label, r.predicted_label]
                        + [format(s, ".17g") for s in r.scores])
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# seeded validation split (SplitMix64 + per-class round-robin, matching the
# pipeline's documented fold algorithm)

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *salts: int) -> int:
    g = SplitMix64(seed)
    out = g.next_u64()
    for s in salts:
        g = SplitMix64(out ^ (s & _MASK))
        out = g.next_u64()
    return out


def stratified_assignment(labels: dict[str, str], folds: int, seed: int) -> dict[str, int]:
    rng = SplitMix64(seed)
    fold_of: dict[str, int] = {}
    by_class: dict[str, list[str]] = {}
    for did, lab in labels.items():
        by_class.setdefault(lab, []).append(did)
    for lab in sorted(by_class):
        members = sorted(by_class[lab])
        rng.shuffle(members)
        for i, did in enumerate(members):
            fold_of[did] = i % folds
    return fold_of


def validation_split(train_ids: list[str], labels: dict[str, str],
                     seed: int) -> tuple[list[str], list[str]]:
    """Hold out one stratified fifth of the training ids for early stopping."""
    assignment = stratified_assignment({d: labels[d] for d in train_ids}, 5, seed)
    val = sorted(d for d in train_ids if assignment[d] == 0)
    train = sorted(d for d in train_ids if assignment[d] != 0)
    return train, val
