# Compiled hot loops. Signatures and results must match _kernels_py exactly.
import numpy as np

from libc.math cimport INFINITY


def held_karp_table(double[:, ::1] dist):
    """Shortest depot-anchored paths over every customer subset.

    ``dist`` is (k+1, k+1) with row/column 0 the depot. Returns ``dp`` of
    shape (2**k, k) where ``dp[mask, j]`` is the length of the shortest path
    leaving the depot, visiting exactly the customers in ``mask`` and ending
    at customer ``j`` (``inf`` when ``j`` is not in ``mask``).
    """
    cdef Py_ssize_t k = dist.shape[0] - 1
    cdef Py_ssize_t size = (<Py_ssize_t>1) << k
    out = np.full((size, k), np.inf, dtype=np.float64)
    cdef double[:, ::1] dp = out
    cdef Py_ssize_t mask, j, nxt, nm
    cdef double cur, val
    for j in range(k):
        dp[(<Py_ssize_t>1) << j, j] = dist[0, j + 1]
    for mask in range(1, size):
        for j in range(k):
            if not (mask >> j) & 1:
                continue
            cur = dp[mask, j]
            if cur == INFINITY:
                continue
            for nxt in range(k):
                if (mask >> nxt) & 1:
                    continue
                val = cur + dist[j + 1, nxt + 1]
                nm = mask | ((<Py_ssize_t>1) << nxt)
                if val < dp[nm, nxt]:
                    dp[nm, nxt] = val
    return out


def stoer_wagner(double[:, :] weights):
    """Global minimum cut of a dense symmetric weight matrix.

    Returns ``(value, side)`` where ``side`` is a boolean mask of one shore.
    Ties in the maximum-adjacency order break toward the lowest index.
    """
    cdef Py_ssize_t n = weights.shape[0]
    if n < 2:
        return 0.0, np.zeros(n, dtype=bool)
    w_arr = np.array(weights, dtype=np.float64, copy=True, order="C")
    cdef double[:, ::1] w = w_arr
    label_arr = np.arange(n, dtype=np.int64)
    cdef long long[::1] label = label_arr
    active_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] active = active_arr
    conn_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] conn = conn_arr
    added_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] added = added_arr
    cdef double best = INFINITY
    cdef long long best_rep = -1
    best_side = np.zeros(n, dtype=bool)
    cdef Py_ssize_t phase, it, v, sel, prev, last, n_active
    cdef double top, cut
    n_active = n
    for phase in range(n - 1):
        for v in range(n):
            conn[v] = 0.0
            added[v] = 0
        prev = -1
        last = -1
        cut = 0.0
        for it in range(n_active):
            sel = -1
            top = -INFINITY
            for v in range(n):
                if active[v] and not added[v] and conn[v] > top:
                    top = conn[v]
                    sel = v
            added[sel] = 1
            prev = last
            last = sel
            cut = conn[sel]
            for v in range(n):
                if active[v] and not added[v]:
                    conn[v] += w[sel, v]
        if cut < best:
            best = cut
            best_rep = last
            best_side = label_arr == last
        for v in range(n):
            w[prev, v] += w[last, v]
            w[v, prev] += w[v, last]
        w[prev, prev] = 0.0
        active[last] = 0
        n_active -= 1
        for v in range(n):
            if label[v] == last:
                label[v] = prev
    return float(best), best_side


def greedy_matching(long long[::1] ei, long long[::1] ej, Py_ssize_t nv):
    """Scan edges in the given order, keeping each edge whose endpoints are
    both still free. Returns ``(mate, chosen)``."""
    mate_arr = np.full(nv, -1, dtype=np.int64)
    cdef long long[::1] mate = mate_arr
    cdef Py_ssize_t m = ei.shape[0]
    chosen_arr = np.zeros(m, dtype=bool)
    cdef unsigned char[::1] chosen = chosen_arr.view(np.uint8)
    cdef Py_ssize_t e
    cdef long long a, b
    for e in range(m):
        a = ei[e]
        b = ej[e]
        if mate[a] < 0 and mate[b] < 0:
            mate[a] = b
            mate[b] = a
            chosen[e] = 1
    return mate_arr, chosen_arr


def bfs_components(Py_ssize_t nv, long long[::1] ei, long long[::1] ej, keep):
    """Label connected components using only edges with ``keep[e]`` true.

    Searches start from the lowest unmarked vertex, so component labels are
    ordered by their smallest member.
    """
    cdef unsigned char[::1] kp = np.ascontiguousarray(keep, dtype=np.uint8)
    cdef Py_ssize_t m = ei.shape[0]
    deg_arr = np.zeros(nv + 1, dtype=np.int64)
    cdef long long[::1] start = deg_arr
    cdef Py_ssize_t e, v, u, head, tail, p
    for e in range(m):
        if kp[e]:
            start[ei[e] + 1] += 1
            start[ej[e] + 1] += 1
    for v in range(nv):
        start[v + 1] += start[v]
    adj_arr = np.empty(start[nv], dtype=np.int64)
    cdef long long[::1] adj = adj_arr
    fill_arr = np.array(deg_arr[:nv], copy=True)
    cdef long long[::1] fill = fill_arr
    for e in range(m):
        if kp[e]:
            adj[fill[ei[e]]] = ej[e]
            fill[ei[e]] += 1
            adj[fill[ej[e]]] = ei[e]
            fill[ej[e]] += 1
    label_arr = np.full(nv, -1, dtype=np.int64)
    cdef long long[::1] label = label_arr
    queue_arr = np.empty(nv, dtype=np.int64)
    cdef long long[::1] queue = queue_arr
    cdef long long comp = 0
    for v in range(nv):
        if label[v] >= 0:
            continue
        label[v] = comp
        head = 0
        tail = 1
        queue[0] = v
        while head < tail:
            u = queue[head]
            head += 1
            for p in range(start[u], start[u + 1]):
                if label[adj[p]] < 0:
                    label[adj[p]] = comp
                    queue[tail] = adj[p]
                    tail += 1
        comp += 1
    return label_arr
