"""Pure-Python/numpy versions of the compiled kernels in ``_kernels.pyx``.

Every function returns bit-identical results to its compiled twin; the test
suite runs both against the same inputs.
"""
from collections import deque

import numpy as np


def held_karp_table(dist):
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    k = dist.shape[0] - 1
    size = 1 << k
    dp = np.full((size, k), np.inf)
    if k == 0:
        return dp
    inner = dist[1:, 1:]
    masks = np.arange(size, dtype=np.int64)
    popcount = np.zeros(size, dtype=np.int64)
    for j in range(k):
        popcount += (masks >> j) & 1
    for j in range(k):
        dp[1 << j, j] = dist[0, j + 1]
    # pull formulation layer by layer; the compiled push loop evaluates the
    # same candidate sums and keeps the same minimum
    for size_bits in range(2, k + 1):
        layer = masks[popcount == size_bits]
        for j in range(k):
            sub = layer[(layer >> j) & 1 == 1]
            if sub.size == 0:
                continue
            prev = dp[sub ^ (1 << j)]
            dp[sub, j] = np.min(prev + inner[:, j], axis=1)
    return dp


def stoer_wagner(weights):
    w = np.array(weights, dtype=np.float64, copy=True)
    n = w.shape[0]
    if n < 2:
        return 0.0, np.zeros(n, dtype=bool)
    label = np.arange(n)
    active = np.ones(n, dtype=bool)
    best = np.inf
    best_side = np.zeros(n, dtype=bool)
    for _ in range(n - 1):
        conn = np.zeros(n)
        free = active.copy()
        prev = last = -1
        cut = 0.0
        for _ in range(int(active.sum())):
            cand = np.where(free, conn, -np.inf)
            sel = int(np.argmax(cand))
            free[sel] = False
            prev, last = last, sel
            cut = conn[sel]
            conn[free] += w[sel, free]
        if cut < best:
            best = cut
            best_side = label == last
        w[prev, :] += w[last, :]
        w[:, prev] += w[:, last]
        w[prev, prev] = 0.0
        active[last] = False
        label[label == last] = prev
    return float(best), best_side


def greedy_matching(ei, ej, nv):
    mate = [-1] * nv
    chosen = np.zeros(len(ei), dtype=bool)
    for e, (a, b) in enumerate(zip(ei.tolist(), ej.tolist())):
        if mate[a] < 0 and mate[b] < 0:
            mate[a] = b
            mate[b] = a
            chosen[e] = True
    return np.array(mate, dtype=np.int64), chosen


def bfs_components(nv, ei, ej, keep):
    adj = [[] for _ in range(nv)]
    keep = np.asarray(keep, dtype=bool)
    for a, b in zip(ei[keep].tolist(), ej[keep].tolist()):
        adj[a].append(b)
        adj[b].append(a)
    label = [-1] * nv
    comp = 0
    for v in range(nv):
        if label[v] >= 0:
            continue
        label[v] = comp
        queue = deque([v])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if label[w] < 0:
                    label[w] = comp
                    queue.append(w)
        comp += 1
    return np.array(label, dtype=np.int64)
