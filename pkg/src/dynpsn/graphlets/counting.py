"""Per-node graphlet orbit counting over event streams and static graphs.

The temporal counter walks every event subsequence of the stream that grows
forward in time, chains through shared endpoints, and fits the catalogue
limits, crediting each touched node with the orbit it occupies. Two
interchangeable kernels implement the walk: a compiled extension
(dynpsn.graphlets._ckernel) and a pure-Python fallback selected at import
when the extension is missing or DYNPSN_PURE_PYTHON=1. Both must produce
identical integer counts; benchmarks/kernel_benchmark.py compares their
speed.

brute_force_count is the independent oracle: it enumerates subsequences
outright and canonicalizes each one from scratch, with no trie and no
incremental state, so tests can pin the fast path against it.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import DynpsnError
from ..psn import EventStream, StaticPSN
from .orbits import OrbitTable, canonical_events, enumerate_dynamic_orbits
from . import _pykernel

try:
    from . import _ckernel  # compiled extension
except ImportError:  # pragma: no cover - depends on build environment
    _ckernel = None

if os.environ.get("DYNPSN_PURE_PYTHON"):
    KERNEL = "python"
elif _ckernel is not None:
    KERNEL = "cython"
else:
    KERNEL = "python"

ORACLE_EVENT_LIMIT = 25
ORACLE_NODE_LIMIT = 12


class CountingError(DynpsnError):
    pass


class OracleLimitError(DynpsnError):
    pass


@dataclass
class GDVM:
    """Per-node orbit count matrix for one domain (rows follow residue order)."""
    domain_id: str
    counts: np.ndarray  # (n, total_orbits) int64


# ---------------------------------------------------------------------------
# trie over canonical event-sequence prefixes

def _build_trie(table: OrbitTable) -> tuple[np.ndarray, np.ndarray]:
    """children[node*6+code] and orbit_ids[node*4+label]; node 0 is the root."""
    pair_code = _pykernel.PAIR_CODE
    node_of: dict = {(): 0}
    children = [[-1] * 6]
    orbit_ids = [[-1] * 4]
    for cls in sorted(table.classes, key=lambda c: len(c.events)):
        prefix = cls.events[:-1]
        if prefix not in node_of:
            raise CountingError("orbit table is not prefix-closed")
        parent = node_of[prefix]
        node = len(children)
        node_of[cls.events] = node
        children.append([-1] * 6)
        row = [-1] * 4
        for lab, orb in enumerate(cls.orbit_ids):
            row[lab] = orb
        orbit_ids.append(row)
        children[parent][pair_code[cls.events[-1]]] = node
    child_arr = np.array(children, dtype=np.int32).reshape(-1)
    orbit_arr = np.array(orbit_ids, dtype=np.int32).reshape(-1)
    return child_arr, orbit_arr


def _trie_for(table: OrbitTable) -> tuple[np.ndarray, np.ndarray]:
    cached = getattr(table, "_trie_cache", None)
    if cached is None:
        cached = _build_trie(table)
        table._trie_cache = cached
    return cached


def _incidence(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """CSR lists of event indices per node, ordered by event index."""
    m = len(u)
    deg = np.zeros(n + 1, dtype=np.int32)
    for x in u:
        deg[x + 1] += 1
    for x in v:
        deg[x + 1] += 1
    start = np.cumsum(deg, dtype=np.int32)
    evt = np.zeros(2 * m, dtype=np.int32)
    fill = start[:-1].copy()
    for j in range(m):
        evt[fill[u[j]]] = j
        fill[u[j]] += 1
        evt[fill[v[j]]] = j
        fill[v[j]] += 1
    return start, evt


def count_dynamic_orbits(stream: EventStream, table: OrbitTable,
                         max_gap: int | None = None,
                         kernel: str | None = None) -> GDVM:
    """Count per-node temporal orbit participations of every qualifying
    subsequence of the stream; exact integer counts."""
    if table.kind != "dynamic":
        raise CountingError("count_dynamic_orbits needs a dynamic orbit table")
    stream.validate(unique_pairs=False)
    n = stream.n
    m = len(stream.events)
    u = np.array([e[0] for e in stream.events], dtype=np.int32)
    v = np.array([e[1] for e in stream.events], dtype=np.int32)
    t = np.array([e[2] for e in stream.events], dtype=np.int32)
    counts = np.zeros((n, table.total_orbits), dtype=np.int64)
    if m == 0:
        return GDVM(domain_id=stream.domain_id, counts=counts)
    inc_start, inc_evt = _incidence(n, u, v)
    child_arr, orbit_arr = _trie_for(table)
    gap = -1 if max_gap is None else int(max_gap)
    which = kernel or KERNEL
    if which == "cython":
        if _ckernel is None:
            raise CountingError("compiled kernel requested but not built")
        _ckernel.count_events(n, u, v, t, inc_start, inc_evt, child_arr, orbit_arr,
                             table.max_nodes, table.max_events, gap, counts)
    elif which == "python":
        py_counts = [[0] * table.total_orbits for _ in range(n)]
        _pykernel.count_events(
            n, u.tolist(), v.tolist(), t.tolist(),
            inc_start.tolist(), inc_evt.tolist(),
            [row.tolist() for row in child_arr.reshape(-1, 6)],
            [row.tolist() for row in orbit_arr.reshape(-1, 4)],
            table.max_nodes, table.max_events, gap, py_counts)
        counts = np.array(py_counts, dtype=np.int64)
    else:
        raise CountingError(f"unknown kernel {which!r}")
    return GDVM(domain_id=stream.domain_id, counts=counts)


# ---------------------------------------------------------------------------
# independent oracle

def brute_force_count(stream: EventStream, max_nodes: int, max_events: int,
                      max_gap: int | None = None, table: OrbitTable | None = None,
                      event_limit: int = ORACLE_EVENT_LIMIT) -> GDVM:
    """Explicitly enumerate every qualifying subsequence and canonicalize it
    from scratch. Test-only; refuses streams above event_limit (default 25,
    raisable by callers that accept the combinatorial cost)."""
    if len(stream.events) > event_limit:
        raise OracleLimitError(
            f"stream has {len(stream.events)} events, oracle limit is {event_limit}")
    stream.validate(unique_pairs=False)
    if table is None:
        table = enumerate_dynamic_orbits(max_nodes, max_events)
    if table.max_nodes != max_nodes or table.max_events != max_events:
        raise CountingError("orbit table limits do not match requested limits")
    events = [(e[0], e[1]) for e in stream.events]
    times = [e[2] for e in stream.events]
    m = len(events)
    counts = np.zeros((stream.n, table.total_orbits), dtype=np.int64)

    def credit(chosen: list[int]) -> None:
        seq = [events[i] for i in chosen]
        form, labels = canonical_events(seq)
        cls = table.index.get(form)
        if cls is None:
            raise CountingError("subsequence canonical form missing from table")
        for node, lab in labels.items():
            counts[node, cls.orbit_ids[lab]] += 1

    def grow(chosen: list[int], nodes: set[int]) -> None:
        credit(chosen)
        if len(chosen) == max_events:
            return
        last = chosen[-1]
        lu, lv = events[last]
        for j2 in range(last + 1, m):
            a, b = events[j2]
            if a != lu and a != lv and b != lu and b != lv:
                continue
            if max_gap is not None and times[j2] - times[last] > max_gap:
                continue
            grown = nodes | {a, b}
            if len(grown) > max_nodes:
                continue
            grow(chosen + [j2], grown)

    for j0 in range(m):
        a, b = events[j0]
        grow([j0], {a, b})
    return GDVM(domain_id=stream.domain_id, counts=counts)


def class_embedding_counts(stream: EventStream, table: OrbitTable,
                           max_gap: int | None = None,
                           event_limit: int = ORACLE_EVENT_LIMIT) -> dict[int, int]:
    """Embeddings per graphlet class, via the same explicit enumeration."""
    if len(stream.events) > event_limit:
        raise OracleLimitError("stream too large for embedding counter")
    events = [(e[0], e[1]) for e in stream.events]
    times = [e[2] for e in stream.events]
    m = len(events)
    out: dict[int, int] = {}

    def grow(chosen: list[int], nodes: set[int]) -> None:
        form, _ = canonical_events([events[i] for i in chosen])
        cls = table.index[form]
        out[cls.class_id] = out.get(cls.class_id, 0) + 1
        if len(chosen) == table.max_events:
            return
        last = chosen[-1]
        lu, lv = events[last]
        for j2 in range(last + 1, m):
            a, b = events[j2]
            if a != lu and a != lv and b != lu and b != lv:
                continue
            if max_gap is not None and times[j2] - times[last] > max_gap:
                continue
            grown = nodes | {a, b}
            if len(grown) > table.max_nodes:
                continue
            grow(chosen + [j2], grown)

    for j0 in range(m):
        a, b = events[j0]
        grow([j0], {a, b})
    return out


# ---------------------------------------------------------------------------
# static graphlet counting

def _canonical_graph_mapping(n: int, edges: tuple) -> tuple[tuple, tuple]:
    """Canonical edge set plus one label permutation realizing it."""
    best = None
    best_perm = None
    for perm in itertools.permutations(range(n)):
        cand = tuple(sorted((perm[a], perm[b]) if perm[a] < perm[b] else (perm[b], perm[a])
                            for a, b in edges))
        if best is None or cand < best:
            best = cand
            best_perm = perm
    return best, best_perm


def count_static_orbits(psn: StaticPSN, table: OrbitTable) -> GDVM:
    """Induced-subgraph orbit census on 2..max_nodes nodes.

    Connected node subsets are enumerated exactly once each (extension-tree
    enumeration with exclusive neighborhoods), then canonicalized and
    credited per node.
    """
    if table.kind != "static":
        raise CountingError("count_static_orbits needs a static orbit table")
    n = psn.n
    adj: list[set[int]] = [set() for _ in range(n)]
    for a, b in psn.edges:
        adj[a].add(b)
        adj[b].add(a)
    counts = np.zeros((n, table.total_orbits), dtype=np.int64)

    def credit(sub: tuple[int, ...]) -> None:
        local = {x: i for i, x in enumerate(sub)}
        edges = tuple((local[a], local[b]) if local[a] < local[b] else (local[b], local[a])
                      for i, a in enumerate(sub) for b in sub[i + 1:] if b in adj[a])
        form, perm = _canonical_graph_mapping(len(sub), edges)
        cls = table.index.get(form)
        if cls is None:
            raise CountingError("induced subgraph missing from static table")
        for x in sub:
            counts[x, cls.orbit_ids[perm[local[x]]]] += 1

    def extend(sub: list[int], ext: set[int], root: int, closed: set[int]) -> None:
        if len(sub) >= 2:
            credit(tuple(sub))
        if len(sub) == table.max_nodes:
            return
        ext = set(ext)
        while ext:
            w = ext.pop()
            grown_closed = closed | adj[w]
            new_ext = ext | {x for x in adj[w] if x > root and x not in closed}
            extend(sub + [w], new_ext, root, grown_closed)

    for v in range(n):
        extend([v], {x for x in adj[v] if x > v}, v, {v} | adj[v])
    return GDVM(domain_id="", counts=counts)


def brute_force_static_count(psn: StaticPSN, table: OrbitTable,
                             node_limit: int = ORACLE_NODE_LIMIT) -> GDVM:
    """Subset-enumeration oracle for static counting (graphs up to node_limit)."""
    if psn.n > node_limit:
        raise OracleLimitError(f"graph has {psn.n} nodes, oracle limit {node_limit}")
    adj: list[set[int]] = [set() for _ in range(psn.n)]
    for a, b in psn.edges:
        adj[a].add(b)
        adj[b].add(a)
    counts = np.zeros((psn.n, table.total_orbits), dtype=np.int64)
    for k in range(2, table.max_nodes + 1):
        for sub in itertools.combinations(range(psn.n), k):
            local = {x: i for i, x in enumerate(sub)}
            edges = tuple((local[a], local[b]) if local[a] < local[b]
                          else (local[b], local[a])
                          for i, a in enumerate(sub) for b in sub[i + 1:] if b in adj[a])
            loc_adj = [[] for _ in range(k)]
            for a, b in edges:
                loc_adj[a].append(b)
                loc_adj[b].append(a)
            seen = {0}
            stack = [0]
            while stack:
                x = stack.pop()
                for y in loc_adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if len(seen) != k:
                continue
            form, perm = _canonical_graph_mapping(k, edges)
            cls = table.index.get(form)
            if cls is None:
                raise CountingError("induced subgraph missing from static table")
            for x in sub:
                counts[x, cls.orbit_ids[perm[local[x]]]] += 1
    return GDVM(domain_id="", counts=counts)


# ---------------------------------------------------------------------------
# count-matrix files

def write_gdvm(gdvm: GDVM, path: str | Path) -> None:
    rows, cols = gdvm.counts.shape
    lines = [f"DGDVM v1 {gdvm.domain_id} {rows} {cols}"]
    lines.extend(" ".join(str(int(x)) for x in row) for row in gdvm.counts)
    tmp = Path(str(path) + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_gdvm(path: str | Path) -> GDVM:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("DGDVM v1 "):
        raise CountingError(f"{path}: missing DGDVM v1 header")
    _, _, domain_id, rows, cols = lines[0].split()
    rows, cols = int(rows), int(cols)
    if len(lines) != rows + 1:
        raise CountingError(f"{path}: expected {rows} rows")
    counts = np.zeros((rows, cols), dtype=np.int64)
    for i, ln in enumerate(lines[1:]):
        vals = ln.split()
        if len(vals) != cols:
            raise CountingError(f"{path}: row {i} has {len(vals)} values, expected {cols}")
        counts[i] = [int(x) for x in vals]
    return GDVM(domain_id=domain_id, counts=counts)
