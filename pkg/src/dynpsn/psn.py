"""Static and dynamic protein structure networks plus their event streams.

A static PSN connects residues whose C-alpha atoms sit within a distance
threshold (inclusive, default 6 A). The dynamic PSN is the ordered series of
PSNs induced on growing sequence prefixes of k residues per step; snapshots
are nested because coordinates never move. The event stream lists each final
edge once, timestamped with the first snapshot containing it.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import DynpsnError
from .structure_io import ProteinDomain

DEFAULT_THRESHOLD = 6.0
DEFAULT_K = 5


class StreamFormatError(DynpsnError):
    pass


@dataclass(frozen=True)
class StaticPSN:
    n: int
    edges: frozenset  # unordered 0-based pairs (u, v) with u < v

    def degree_ok(self) -> bool:
        return all(0 <= u < v < self.n for u, v in self.edges)


@dataclass
class DynamicPSN:
    snapshots: list[StaticPSN]
    k: int
    node_counts: list[int]

    @property
    def T(self) -> int:
        return len(self.snapshots)

    def final(self) -> StaticPSN:
        return self.snapshots[-1]


@dataclass
class EventStream:
    domain_id: str
    n: int
    T: int
    events: list[tuple[int, int, int]]  # (u, v, t): u < v, t is a 1-based snapshot index
    node_counts: list[int] = field(default_factory=list)

    def validate(self, unique_pairs: bool = True) -> None:
        """PSN-derived streams list each pair once (first-appearance
        semantics); general streams may repeat a pair at later times, so
        the counter validates with unique_pairs=False."""
        seen = set()
        prev = None
        for (u, v, t) in self.events:
            if not (0 <= u < v < self.n):
                raise StreamFormatError(f"{self.domain_id}: bad event nodes ({u},{v})")
            if not (1 <= t <= self.T):
                raise StreamFormatError(f"{self.domain_id}: event time {t} outside 1..{self.T}")
            if unique_pairs:
                if (u, v) in seen:
                    raise StreamFormatError(f"{self.domain_id}: duplicate pair ({u},{v})")
                seen.add((u, v))
            key = (t, u, v)
            if prev is not None and key <= prev:
                raise StreamFormatError(f"{self.domain_id}: events not sorted at {key}")
            prev = key


def build_static_psn(domain: ProteinDomain, threshold: float = DEFAULT_THRESHOLD) -> StaticPSN:
    """Edge (i, j) iff the C-alpha distance is <= threshold (inclusive)."""
    if threshold <= 0:
        raise DynpsnError(f"threshold must be positive, got {threshold}")
    pts = domain.coords()
    n = len(pts)
    edges = set()
    if n >= 2:
        diff = pts[:, None, :] - pts[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        iu, ju = np.triu_indices(n, k=1)
        hit = dist[iu, ju] <= threshold
        edges = {(int(a), int(b)) for a, b in zip(iu[hit], ju[hit])}
    return StaticPSN(n=n, edges=frozenset(edges))


def build_dynamic_psn(domain: ProteinDomain, k: int = DEFAULT_K,
                      threshold: float = DEFAULT_THRESHOLD) -> DynamicPSN:
    """Nested prefix snapshots: snapshot s covers the first min(s*k, n) residues."""
    if k < 1:
        raise DynpsnError(f"k must be >= 1, got {k}")
    full = build_static_psn(domain, threshold)
    n = full.n
    T = max(1, math.ceil(n / k))
    snapshots = []
    counts = []
    for s in range(1, T + 1):
        m = min(s * k, n)
        counts.append(m)
        snapshots.append(StaticPSN(n=m, edges=frozenset(
            (u, v) for (u, v) in full.edges if v < m)))
    dpsn = DynamicPSN(snapshots=snapshots, k=k, node_counts=counts)
    _assert_nested(dpsn)
    return dpsn


def _assert_nested(dpsn: DynamicPSN) -> None:
    for a, b in zip(dpsn.snapshots, dpsn.snapshots[1:]):
        if not a.edges <= b.edges:
            raise DynpsnError("snapshot nesting violated")


def derive_event_stream(dpsn: DynamicPSN, domain_id: str = "") -> EventStream:
    """One event per final edge, stamped with its first snapshot of appearance."""
    first_seen: dict[tuple[int, int], int] = {}
    for s, snap in enumerate(dpsn.snapshots, start=1):
        for e in snap.edges:
            if e not in first_seen:
                first_seen[e] = s
    events = sorted(((u, v, t) for (u, v), t in first_seen.items()),
                    key=lambda e: (e[2], e[0], e[1]))
    stream = EventStream(domain_id=domain_id, n=dpsn.final().n, T=dpsn.T,
                         events=events, node_counts=list(dpsn.node_counts))
    stream.validate()
    return stream


def rebuild_final_snapshot(stream: EventStream) -> StaticPSN:
    """Apply every event with t <= T; must reproduce the final static PSN."""
    return StaticPSN(n=stream.n, edges=frozenset(
        (u, v) for (u, v, t) in stream.events if t <= stream.T))


def check_connectivity(psn: StaticPSN) -> bool:
    """True iff the graph is connected (single-node graphs count as connected)."""
    if psn.n <= 1:
        return True
    adj: list[list[int]] = [[] for _ in range(psn.n)]
    for u, v in psn.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = bytearray(psn.n)
    stack = [0]
    seen[0] = 1
    found = 1
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = 1
                found += 1
                stack.append(y)
    return found == psn.n


# ---------------------------------------------------------------------------
# event-stream files

def write_event_stream(stream: EventStream, path: str | Path) -> None:
    stream.validate()
    lines = [f"EVENTS v1 {stream.domain_id} {stream.n} {stream.T} {len(stream.events)}"]
    lines.extend(f"{t} {u} {v}" for (u, v, t) in stream.events)
    lines.append("COUNTS " + " ".join(str(c) for c in stream.node_counts))
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_event_stream(path: str | Path) -> EventStream:
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("EVENTS v1 "):
        raise StreamFormatError(f"{path}: missing EVENTS v1 header")
    head = lines[0].split()
    if len(head) != 6:
        raise StreamFormatError(f"{path}: malformed header")
    _, _, domain_id, n, T, m = head
    n, T, m = int(n), int(T), int(m)
    if len(lines) != m + 2:
        raise StreamFormatError(f"{path}: expected {m} events plus COUNTS line")
    events = []
    for ln in lines[1:1 + m]:
        t, u, v = (int(x) for x in ln.split())
        events.append((u, v, t))
    if not lines[-1].startswith("COUNTS"):
        raise StreamFormatError(f"{path}: missing COUNTS line")
    counts = [int(x) for x in lines[-1].split()[1:]]
    if len(counts) != T:
        raise StreamFormatError(f"{path}: COUNTS length {len(counts)} != T {T}")
    stream = EventStream(domain_id=domain_id, n=n, T=T, events=events, node_counts=counts)
    stream.validate()
    return stream
