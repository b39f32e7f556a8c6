"""Pure-Python temporal graphlet counting kernel.

Reference implementation of the same depth-first walk the compiled kernel
runs: grow event subsequences forward in stream order, requiring each event
to share an endpoint with the previous one, track both first-appearance
labelings of the opening event, and follow the canonical-prefix trie one
transition per event. Selected automatically when the compiled module is
unavailable, or forced via DYNPSN_PURE_PYTHON=1.

State per branch:
  snodes  original node ids in first-appearance order (label = position)
  flag    lexicographic comparison of the two labelings so far
          (0 tied, -1 plain smaller, +1 swapped smaller)
"""

from __future__ import annotations

from bisect import bisect_right

# pair (a, b), a < b < 4  ->  trie edge symbol
PAIR_CODE = {(0, 1): 0, (0, 2): 1, (0, 3): 2, (1, 2): 3, (1, 3): 4, (2, 3): 5}


def _swap01(lab: int) -> int:
    return lab ^ 1 if lab < 2 else lab


def count_events(n, u, v, t, inc_start, inc_evt, trie_child, trie_orbit,
                 max_nodes, max_events, max_gap, counts) -> None:
    """Accumulate per-node orbit counts into ``counts`` (n x total_orbits)."""
    m = len(u)
    gap_on = max_gap >= 0
    snodes = [0, 0, 0, 0]

    def visit(node, size, flag):
        orb = trie_orbit[node]
        if flag <= 0:
            for i in range(size):
                counts[snodes[i]][orb[i]] += 1
        else:
            for i in range(size):
                counts[snodes[i]][orb[_swap01(i)]] += 1

    def extend(j, node, size, flag, depth):
        if depth == max_events:
            return
        a0 = u[j]
        b0 = v[j]
        tj = t[j]
        for w in (a0, b0):
            lo = inc_start[w]
            hi = inc_start[w + 1]
            p = bisect_right(inc_evt, j, lo, hi)
            while p < hi:
                j2 = inc_evt[p]
                p += 1
                if gap_on and t[j2] - tj > max_gap:
                    break
                a = u[j2]
                b = v[j2]
                if w == b0 and (a == a0 or b == a0):
                    continue  # already reached through a0
                la = lb = -1
                for i in range(size):
                    sn = snodes[i]
                    if sn == a:
                        la = i
                    if sn == b:
                        lb = i
                size2 = size
                if la < 0:
                    if size == max_nodes:
                        continue
                    snodes[size] = a
                    la = size
                    size2 = size + 1
                elif lb < 0:
                    if size == max_nodes:
                        continue
                    snodes[size] = b
                    lb = size
                    size2 = size + 1
                pa = (la, lb) if la < lb else (lb, la)
                if flag == 0:
                    sa, sb = _swap01(la), _swap01(lb)
                    pb = (sa, sb) if sa < sb else (sb, sa)
                    if pa < pb:
                        canon, flag2 = pa, -1
                    elif pb < pa:
                        canon, flag2 = pb, 1
                    else:
                        canon, flag2 = pa, 0
                elif flag < 0:
                    canon, flag2 = pa, flag
                else:
                    sa, sb = _swap01(la), _swap01(lb)
                    canon, flag2 = ((sa, sb) if sa < sb else (sb, sa)), flag
                child = trie_child[node][PAIR_CODE[canon]]
                if child < 0:
                    raise RuntimeError("orbit table does not cover a reachable prefix")
                visit(child, size2, flag2)
                extend(j2, child, size2, flag2, depth + 1)

    root_child = trie_child[0][PAIR_CODE[(0, 1)]]
    for e0 in range(m):
        snodes[0] = u[e0]
        snodes[1] = v[e0]
        visit(root_child, 2, 0)
        extend(e0, root_child, 2, 0, 1)
