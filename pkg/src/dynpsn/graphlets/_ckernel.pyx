# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled temporal graphlet counting kernel.

Same depth-first walk as _pykernel: subsequences grow forward in stream
order, each event shares an endpoint with the previous one, both
first-appearance labelings of the opening event are tracked through a
comparison flag, and every step follows one canonical-prefix trie
transition.
"""

from libc.stdint cimport int32_t, int64_t


cdef int PC[4][4]
PC[0][1] = 0; PC[0][2] = 1; PC[0][3] = 2
PC[1][2] = 3; PC[1][3] = 4; PC[2][3] = 5
PC[1][0] = 0; PC[2][0] = 1; PC[3][0] = 2
PC[2][1] = 3; PC[3][1] = 4; PC[3][2] = 5


cdef inline int swap01(int lab) noexcept nogil:
    return lab ^ 1 if lab < 2 else lab


cdef inline void _visit(int node, int size, int flag,
                        const int32_t* trie_orbit, int64_t* counts,
                        Py_ssize_t ncols, const int* snodes) noexcept nogil:
    cdef int i, lab
    cdef const int32_t* orb = trie_orbit + node * 4
    for i in range(size):
        lab = i if flag <= 0 else swap01(i)
        counts[snodes[i] * ncols + orb[lab]] += 1


cdef void _extend(int j, int node, int size, int flag, int depth,
                  const int32_t* u, const int32_t* v, const int32_t* t,
                  const int32_t* inc_start, const int32_t* inc_evt,
                  const int32_t* trie_child, const int32_t* trie_orbit,
                  int max_nodes, int max_events, long max_gap, bint gap_on,
                  int64_t* counts, Py_ssize_t ncols, int* snodes) noexcept nogil:
    cdef int a0, b0, tj, wi, w, j2, a, b, la, lb, i, size2
    cdef int pa_lo, pa_hi, pb_lo, pb_hi, canon_lo, canon_hi, flag2, child
    cdef int lo, hi, mid, p
    if depth == max_events:
        return
    a0 = u[j]
    b0 = v[j]
    tj = t[j]
    for wi in range(2):
        w = a0 if wi == 0 else b0
        lo = inc_start[w]
        hi = inc_start[w + 1]
        # first incident event with index > j
        while lo < hi:
            mid = (lo + hi) >> 1
            if inc_evt[mid] > j:
                hi = mid
            else:
                lo = mid + 1
        p = lo
        hi = inc_start[w + 1]
        while p < hi:
            j2 = inc_evt[p]
            p += 1
            if gap_on and t[j2] - tj > max_gap:
                break
            a = u[j2]
            b = v[j2]
            if wi == 1 and (a == a0 or b == a0):
                continue  # already reached through a0
            la = -1
            lb = -1
            for i in range(size):
                if snodes[i] == a:
                    la = i
                if snodes[i] == b:
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
            if la < lb:
                pa_lo = la; pa_hi = lb
            else:
                pa_lo = lb; pa_hi = la
            if flag == 0:
                pb_lo = swap01(pa_lo); pb_hi = swap01(pa_hi)
                if pb_lo > pb_hi:
                    pb_lo, pb_hi = pb_hi, pb_lo
                if pa_lo < pb_lo or (pa_lo == pb_lo and pa_hi < pb_hi):
                    canon_lo = pa_lo; canon_hi = pa_hi; flag2 = -1
                elif pb_lo < pa_lo or (pa_lo == pb_lo and pb_hi < pa_hi):
                    canon_lo = pb_lo; canon_hi = pb_hi; flag2 = 1
                else:
                    canon_lo = pa_lo; canon_hi = pa_hi; flag2 = 0
            elif flag < 0:
                canon_lo = pa_lo; canon_hi = pa_hi; flag2 = flag
            else:
                canon_lo = swap01(pa_lo); canon_hi = swap01(pa_hi)
                if canon_lo > canon_hi:
                    canon_lo, canon_hi = canon_hi, canon_lo
                flag2 = flag
            child = trie_child[node * 6 + PC[canon_lo][canon_hi]]
            if child < 0:
                continue  # unreachable when the table matches the limits
            _visit(child, size2, flag2, trie_orbit, counts, ncols, snodes)
            _extend(j2, child, size2, flag2, depth + 1,
                    u, v, t, inc_start, inc_evt, trie_child, trie_orbit,
                    max_nodes, max_events, max_gap, gap_on, counts, ncols, snodes)


def count_events(int n, int32_t[::1] u, int32_t[::1] v, int32_t[::1] t,
                 int32_t[::1] inc_start, int32_t[::1] inc_evt,
                 int32_t[::1] trie_child, int32_t[::1] trie_orbit,
                 int max_nodes, int max_events, long max_gap,
                 int64_t[:, ::1] counts):
    cdef Py_ssize_t m = u.shape[0]
    cdef Py_ssize_t ncols = counts.shape[1]
    cdef bint gap_on = max_gap >= 0
    cdef int snodes[4]
    cdef int e0, root_child
    if m == 0:
        return
    root_child = trie_child[0 * 6 + PC[0][1]]
    with nogil:
        for e0 in range(m):
            snodes[0] = u[e0]
            snodes[1] = v[e0]
            _visit(root_child, 2, 0, &trie_orbit[0], &counts[0, 0], ncols, snodes)
            _extend(e0, root_child, 2, 0, 1,
                    &u[0], &v[0], &t[0], &inc_start[0], &inc_evt[0],
                    &trie_child[0], &trie_orbit[0],
                    max_nodes, max_events, max_gap, gap_on,
                    &counts[0, 0], ncols, snodes)
