"""Canonical catalogues of temporal and static graphlet orbits.

A temporal graphlet is an ordered sequence of edge events in which every
event after the first shares an endpoint with the event immediately before
it, so every prefix is a connected multigraph. Repeated events on the same
pair are legal. Nodes are numbered by first appearance; the two possible
labelings of the opening event make the labeling ambiguous, and the
canonical form is the lexicographically smaller of the two relabeled
sequences. Orbits group node positions under automorphisms that fix every
event in place.

With up to 4 nodes and 6 events this catalogue has 981 graphlet classes and
3,727 orbits. Static graphlets (connected induced subgraphs on up to 4
nodes) are catalogued the same way: canonical form is the minimum edge set
over all node relabelings, orbits come from edge-set-preserving
permutations.
"""

from __future__ import annotations

import hashlib
import itertools
import os
from dataclasses import dataclass, field
from pathlib import Path

from .. import DynpsnError

Pair = tuple[int, int]
EventSeq = tuple[Pair, ...]


class OrbitTableError(DynpsnError):
    pass


def relabel_first_appearance(seq, swap_first: bool) -> EventSeq:
    """Relabel nodes in first-appearance order; swap_first flips the labels
    handed to the opening event's two endpoints."""
    labels: dict = {}
    out = []
    for (u, v) in seq:
        for x in (u, v):
            if x not in labels:
                if len(labels) == 0:
                    labels[x] = 1 if swap_first else 0
                elif len(labels) == 1:
                    labels[x] = 0 if swap_first else 1
                else:
                    labels[x] = len(labels)
        a, b = labels[u], labels[v]
        out.append((a, b) if a < b else (b, a))
    return tuple(out)


def canonical_events(seq) -> tuple[EventSeq, dict]:
    """Canonical form of an event sequence plus the node -> label mapping
    realizing it (ties resolved to the unswapped labeling)."""
    plain = relabel_first_appearance(seq, False)
    swapped = relabel_first_appearance(seq, True)
    swap = swapped < plain
    labels: dict = {}
    for (u, v) in seq:
        for x in (u, v):
            if x not in labels:
                if len(labels) == 0:
                    labels[x] = 1 if swap else 0
                elif len(labels) == 1:
                    labels[x] = 0 if swap else 1
                else:
                    labels[x] = len(labels)
    return (swapped if swap else plain), labels


def _orbit_partition_events(seq: EventSeq) -> tuple[tuple[int, ...], ...]:
    """Node positions grouped under permutations fixing each event in place."""
    k = len({x for e in seq for x in e})
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in itertools.permutations(range(k)):
        ok = True
        for (u, v) in seq:
            a, b = perm[u], perm[v]
            if ((a, b) if a < b else (b, a)) != (u, v):
                ok = False
                break
        if ok:
            for i in range(k):
                ra, rb = find(i), find(perm[i])
                if ra != rb:
                    parent[ra] = rb
    groups: dict[int, list[int]] = {}
    for i in range(k):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for g in sorted(groups.values()))


@dataclass(frozen=True)
class GraphletClass:
    class_id: int
    events: EventSeq            # canonical event sequence (or sorted edge set if static)
    node_count: int
    orbit_groups: tuple[tuple[int, ...], ...]
    orbit_ids: tuple[int, ...]  # global orbit id per node label

    @property
    def event_count(self) -> int:
        return len(self.events)


@dataclass
class OrbitTable:
    kind: str                   # "dynamic" | "static"
    max_nodes: int
    max_events: int             # 0 for static tables
    classes: list[GraphletClass]
    total_orbits: int
    index: dict = field(default_factory=dict, repr=False)  # canonical form -> class

    def __post_init__(self):
        if not self.index:
            self.index = {c.events: c for c in self.classes}

    def content_hash(self) -> str:
        return hashlib.sha256(serialize_orbit_table(self).encode()).hexdigest()


def _assign_orbits(keyed: list[tuple], kind: str, max_nodes: int, max_events: int) -> OrbitTable:
    """keyed: list of (sort_key, canonical_form, node_count, orbit_groups)."""
    keyed.sort(key=lambda t: t[0])
    classes = []
    next_orbit = 0
    for class_id, (_, form, node_count, groups) in enumerate(keyed):
        orbit_of_label = [0] * node_count
        for gi, group in enumerate(groups):
            for lab in group:
                orbit_of_label[lab] = next_orbit + gi
        classes.append(GraphletClass(
            class_id=class_id, events=form, node_count=node_count,
            orbit_groups=groups, orbit_ids=tuple(orbit_of_label)))
        next_orbit += len(groups)
    return OrbitTable(kind=kind, max_nodes=max_nodes, max_events=max_events,
                      classes=classes, total_orbits=next_orbit)


def enumerate_dynamic_orbits(max_nodes: int = 4, max_events: int = 6) -> OrbitTable:
    """Exhaustive catalogue of temporal graphlet classes and their orbits.

    Classes are ordered by (event count, node count, canonical form), and
    global orbit ids follow that order. Deterministic and idempotent.
    """
    if max_nodes < 2 or max_events < 1:
        raise OrbitTableError("need max_nodes >= 2 and max_events >= 1")
    forms: set[EventSeq] = set()

    def grow(seq: EventSeq, nlabels: int):
        forms.add(min(relabel_first_appearance(seq, False),
                      relabel_first_appearance(seq, True)))
        if len(seq) == max_events:
            return
        last = seq[-1]
        for a in range(nlabels):
            for b in range(a + 1, nlabels):
                if a in last or b in last:
                    grow(seq + ((a, b),), nlabels)
        if nlabels < max_nodes:
            for a in last:
                grow(seq + ((a, nlabels),), nlabels + 1)

    grow(((0, 1),), 2)
    keyed = []
    for form in forms:
        n = len({x for e in form for x in e})
        groups = _orbit_partition_events(form)
        keyed.append(((len(form), n, form), form, n, groups))
    return _assign_orbits(keyed, "dynamic", max_nodes, max_events)


# ---------------------------------------------------------------------------
# static graphlets

def canonical_graph(n: int, edges) -> tuple[Pair, ...]:
    """Minimum sorted edge tuple over all node relabelings."""
    best = None
    for perm in itertools.permutations(range(n)):
        cand = tuple(sorted((perm[a], perm[b]) if perm[a] < perm[b] else (perm[b], perm[a])
                            for a, b in edges))
        if best is None or cand < best:
            best = cand
    return best


def _orbit_partition_graph(n: int, edges: tuple[Pair, ...]) -> tuple[tuple[int, ...], ...]:
    es = set(edges)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for perm in itertools.permutations(range(n)):
        mapped = {(perm[a], perm[b]) if perm[a] < perm[b] else (perm[b], perm[a])
                  for a, b in es}
        if mapped == es:
            for i in range(n):
                ra, rb = find(i), find(perm[i])
                if ra != rb:
                    parent[ra] = rb
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for g in sorted(groups.values()))


def _connected(n: int, edges) -> bool:
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    cnt = 1
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if not seen[y]:
                seen[y] = True
                cnt += 1
                stack.append(y)
    return cnt == n


def enumerate_static_orbits(max_nodes: int = 4) -> OrbitTable:
    """Catalogue of connected graphs on 2..max_nodes nodes with their orbits."""
    if not (2 <= max_nodes <= 5):
        raise OrbitTableError("static catalogue supports 2..5 nodes")
    found: set[tuple[int, tuple[Pair, ...]]] = set()
    for n in range(2, max_nodes + 1):
        pairs = list(itertools.combinations(range(n), 2))
        for bits in range(1, 1 << len(pairs)):
            edges = tuple(p for i, p in enumerate(pairs) if bits >> i & 1)
            if len({x for e in edges for x in e}) != n:
                continue
            if not _connected(n, edges):
                continue
            found.add((n, canonical_graph(n, edges)))
    keyed = []
    for n, form in found:
        groups = _orbit_partition_graph(n, form)
        keyed.append(((n, form), form, n, groups))
    return _assign_orbits(keyed, "static", max_nodes, 0)


# ---------------------------------------------------------------------------
# orbit-table files

def serialize_orbit_table(table: OrbitTable) -> str:
    if table.kind == "dynamic":
        lines = [f"ORBITS v1 {table.max_nodes} {table.max_events} {table.total_orbits}"]
    else:
        lines = [f"ORBITS-STATIC v1 {table.max_nodes} {table.total_orbits}"]
    for c in table.classes:
        evs = " ".join(f"{u}-{v}" for u, v in c.events)
        part = " ".join(",".join(str(x) for x in g) for g in c.orbit_groups)
        lines.append(f"{c.class_id} {len(c.events)} {evs} | {part}")
    return "\n".join(lines) + "\n"


def write_orbit_table(table: OrbitTable, path: str | Path) -> None:
    tmp = Path(str(path) + ".tmp")
    tmp.write_text(serialize_orbit_table(table), encoding="utf-8")
    os.replace(tmp, path)


def read_orbit_table(path: str | Path) -> OrbitTable:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise OrbitTableError(f"{path}: empty orbit table")
    head = lines[0].split()
    if head[:2] == ["ORBITS", "v1"]:
        kind, max_nodes, max_events, total = "dynamic", int(head[2]), int(head[3]), int(head[4])
    elif head[:2] == ["ORBITS-STATIC", "v1"]:
        kind, max_nodes, max_events, total = "static", int(head[2]), 0, int(head[3])
    else:
        raise OrbitTableError(f"{path}: unknown orbit-table header")
    classes = []
    next_orbit = 0
    for ln in lines[1:]:
        if not ln.strip():
            continue
        left, _, right = ln.partition("|")
        fields = left.split()
        class_id, m = int(fields[0]), int(fields[1])
        events = tuple(tuple(int(x) for x in f.split("-")) for f in fields[2:])
        if len(events) != m:
            raise OrbitTableError(f"{path}: event count mismatch in class {class_id}")
        groups = tuple(tuple(int(x) for x in g.split(",")) for g in right.split())
        node_count = len({x for e in events for x in e})
        orbit_of_label = [0] * node_count
        for gi, group in enumerate(groups):
            for lab in group:
                orbit_of_label[lab] = next_orbit + gi
        classes.append(GraphletClass(class_id=class_id, events=events,
                                     node_count=node_count, orbit_groups=groups,
                                     orbit_ids=tuple(orbit_of_label)))
        next_orbit += len(groups)
    if next_orbit != total:
        raise OrbitTableError(f"{path}: orbit total {next_orbit} != header {total}")
    return OrbitTable(kind=kind, max_nodes=max_nodes, max_events=max_events,
                      classes=classes, total_orbits=total)
