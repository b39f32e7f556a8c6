"""Self-check harness comparing the fast counting path against the explicit
enumeration oracle, exposed to users as the `oracle` subcommand.

On a counting mismatch the offending stream is shrunk by greedily dropping
events while the mismatch persists, so failures come with a minimal
counterexample.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .graphlets import (
    KERNEL,
    brute_force_count,
    count_dynamic_orbits,
    enumerate_dynamic_orbits,
)
from .graphlets.counting import ORACLE_EVENT_LIMIT, _ckernel
from .psn import EventStream
from . import DynpsnError


class OracleRefusal(DynpsnError):
    pass


@dataclass
class OracleCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class OracleReport:
    checks: list[OracleCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            out.append(f"{status} {c.name}" + (f": {c.detail}" if c.detail else ""))
        return out


KNOWN_ORBIT_TOTALS = {(4, 6): 3727, (2, 1): 1, (3, 2): 5}


def random_stream(seed: int, max_stream_nodes: int, max_stream_events: int) -> EventStream:
    """Seeded stream; pairs may repeat at later timestamps (general stream)."""
    rng = random.Random(seed)
    n = rng.randint(3, max_stream_nodes)
    m = rng.randint(1, max_stream_events)
    tmax = rng.randint(1, max(1, m))
    triples = set()
    attempts = 0
    while len(triples) < m and attempts < 20 * m:
        attempts += 1
        a, b = rng.sample(range(n), 2)
        t = rng.randint(1, tmax)
        triples.add((min(a, b), max(a, b), t))
    events = sorted(((u, v, t) for (u, v, t) in triples), key=lambda e: (e[2], e[0], e[1]))
    return EventStream(domain_id=f"rnd{seed}", n=n, T=tmax, events=events,
                       node_counts=[n] * tmax)


def _shrink(stream: EventStream, mismatch) -> EventStream:
    """Greedily drop events while the mismatch persists."""
    current = stream
    improved = True
    while improved:
        improved = False
        for i in range(len(current.events)):
            cand_events = current.events[:i] + current.events[i + 1:]
            if not cand_events:
                continue
            cand = EventStream(domain_id=current.domain_id, n=current.n, T=current.T,
                               events=cand_events, node_counts=current.node_counts)
            if mismatch(cand):
                current = cand
                improved = True
                break
    return current


def run_oracle(max_nodes: int = 4, max_events: int = 6, streams: int = 20,
               max_stream_nodes: int = 10, max_stream_events: int = 14,
               seed: int = 1, counter=None) -> OracleReport:
    """Verification battery. `counter` defaults to count_dynamic_orbits and is
    injectable so tests can prove the FAIL path reports counterexamples."""
    if max_stream_events > ORACLE_EVENT_LIMIT:
        raise OracleRefusal(
            f"max_stream_events {max_stream_events} above oracle limit {ORACLE_EVENT_LIMIT}")
    if max_stream_nodes > 16:
        raise OracleRefusal(f"max_stream_nodes {max_stream_nodes} above oracle limit 16")
    count = counter or count_dynamic_orbits
    report = OracleReport()

    table = enumerate_dynamic_orbits(max_nodes, max_events)
    expected = KNOWN_ORBIT_TOTALS.get((max_nodes, max_events))
    if expected is not None:
        report.checks.append(OracleCheck(
            name=f"orbits({max_nodes},{max_events}) == {expected}",
            passed=table.total_orbits == expected,
            detail=f"got {table.total_orbits}"))
    else:
        report.checks.append(OracleCheck(
            name=f"orbits({max_nodes},{max_events}) enumerated",
            passed=True, detail=f"{table.total_orbits} orbits"))

    regenerated = enumerate_dynamic_orbits(max_nodes, max_events)
    report.checks.append(OracleCheck(
        name="orbit table regeneration is hash-stable",
        passed=table.content_hash() == regenerated.content_hash()))

    def mismatch(stream: EventStream) -> bool:
        fast = count(stream, table).counts
        slow = brute_force_count(stream, max_nodes, max_events, table=table).counts
        return not np.array_equal(fast, slow)

    bad = None
    for i in range(streams):
        stream = random_stream(seed + i, max_stream_nodes, max_stream_events)
        if mismatch(stream):
            bad = _shrink(stream, mismatch)
            break
    if bad is None:
        report.checks.append(OracleCheck(
            name=f"counting matches oracle on {streams} seeded streams", passed=True))
    else:
        detail = (f"minimal counterexample: n={bad.n} T={bad.T} events="
                  + " ".join(f"({u},{v},t{t})" for u, v, t in bad.events))
        report.checks.append(OracleCheck(
            name=f"counting matches oracle on {streams} seeded streams",
            passed=False, detail=detail))

    if _ckernel is not None:
        parity = True
        for i in range(min(streams, 10)):
            stream = random_stream(seed + 1000 + i, max_stream_nodes, max_stream_events)
            a = count_dynamic_orbits(stream, table, kernel="cython").counts
            b = count_dynamic_orbits(stream, table, kernel="python").counts
            if not np.array_equal(a, b):
                parity = False
                break
        report.checks.append(OracleCheck(
            name="compiled and pure-Python kernels agree", passed=parity))
    else:
        report.checks.append(OracleCheck(
            name="compiled kernel not built; pure-Python fallback active",
            passed=True, detail=f"kernel={KERNEL}"))
    return report
