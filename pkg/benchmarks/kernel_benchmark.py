#!/usr/bin/env python3
"""Benchmark the compiled counting kernel against the pure-Python fallback.

Counts temporal graphlet orbits (4 nodes, 6 events) over event streams
derived from synthetic domains of growing size and prints wall-clock times
for both kernels plus the speedup. Usage:

    python benchmarks/kernel_benchmark.py [--lengths 20,40,60,80] [--repeat 3]
"""

import argparse
import time

from dynpsn.graphlets import count_dynamic_orbits, enumerate_dynamic_orbits
from dynpsn.graphlets.counting import _ckernel
from dynpsn.psn import build_dynamic_psn, derive_event_stream
from dynpsn.structure_io import generate_synthetic_corpus


def stream_for_length(length: int):
    corpus = generate_synthetic_corpus(1234 + length, 3, 30, (length, length))
    dom = next(d for d in corpus if d.label == "helix")
    return derive_event_stream(build_dynamic_psn(dom, k=5), domain_id=dom.id)


def time_kernel(stream, table, kernel: str, repeat: int) -> tuple[float, int]:
    best = float("inf")
    total = 0
    for _ in range(repeat):
        t0 = time.perf_counter()
        gdvm = count_dynamic_orbits(stream, table, kernel=kernel)
        best = min(best, time.perf_counter() - t0)
        total = int(gdvm.counts.sum())
    return best, total


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--lengths", default="20,40,60,80")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    lengths = [int(x) for x in args.lengths.split(",")]

    table = enumerate_dynamic_orbits(4, 6)
    if _ckernel is None:
        print("compiled kernel not built; only the pure-Python kernel is available")
    header = f"{'n':>4} {'events':>7} {'python_s':>10} {'cython_s':>10} {'speedup':>8}  counts"
    print(header)
    print("-" * len(header))
    for length in lengths:
        stream = stream_for_length(length)
        py_t, py_total = time_kernel(stream, table, "python", args.repeat)
        if _ckernel is not None:
            cy_t, cy_total = time_kernel(stream, table, "cython", args.repeat)
            if cy_total != py_total:
                print(f"KERNEL MISMATCH at n={length}: {py_total} vs {cy_total}")
                return 1
            print(f"{stream.n:>4} {len(stream.events):>7} {py_t:>10.4f} {cy_t:>10.4f} "
                  f"{py_t / cy_t:>7.1f}x  {py_total}")
        else:
            print(f"{stream.n:>4} {len(stream.events):>7} {py_t:>10.4f} {'-':>10} "
                  f"{'-':>8}  {py_total}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
