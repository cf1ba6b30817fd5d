"""Upper-bound heuristic: giant tour, bisection split and LPT drone schedule."""
from __future__ import annotations

import heapq
from typing import Sequence

import numpy as np

from .instance import Instance, Solution, truck_duration

SPLIT_ITERATIONS = 40


def nearest_neighbor_tour(instance: Instance, customers=None) -> list[int]:
    t = instance.truck_time
    left = set(instance.customers if customers is None else customers)
    tour = []
    cur = 0
    while left:
        nxt = min(left, key=lambda v: (t[cur, v], v))
        tour.append(nxt)
        left.remove(nxt)
        cur = nxt
    return tour


def two_opt(instance: Instance, tour: Sequence[int]) -> list[int]:
    """First-improvement 2-opt on the closed route depot -> tour -> depot."""
    t = instance.truck_time
    path = np.array([0, *tour, instance.n + 1], dtype=np.int64)
    size = len(path)
    improved = True
    while improved:
        improved = False
        for i in range(size - 3):
            a, b = path[i], path[i + 1]
            c = path[i + 2:size - 1]
            e = path[i + 3:size]
            delta = t[a, c] + t[b, e] - t[a, b] - t[c, e]
            k = int(np.argmin(delta))
            if delta[k] < -1e-9:
                j = i + 2 + k
                path[i + 1:j + 1] = path[i + 1:j + 1][::-1]
                improved = True
    return path[1:-1].tolist()


def build_giant_tour(instance: Instance) -> list[int]:
    return two_opt(instance, nearest_neighbor_tour(instance))


def lpt_schedule(jobs: Sequence[float], m: int) -> tuple[list[int], float]:
    """Longest-processing-time-first list scheduling on ``m`` machines.

    Returns the machine of every job and the resulting makespan.
    """
    if m < 1:
        raise ValueError("LPT needs at least one machine")
    order = sorted(range(len(jobs)), key=lambda j: (-jobs[j], j))
    heap = [(0.0, k) for k in range(m)]
    assignment = [0] * len(jobs)
    for j in order:
        load, k = heapq.heappop(heap)
        assignment[j] = k
        heapq.heappush(heap, (load + jobs[j], k))
    return assignment, max(load for load, _ in heap)


def _remove_until(instance: Instance, giant: Sequence[int], target: float):
    """Greedily drop eligible customers from the giant tour, best saving per
    unit of drone time first, until the truck route fits ``target``."""
    t = instance.truck_time
    d = instance.drone_time
    last = instance.n + 1
    path = [0, *giant, last]
    prev = {path[k]: path[k - 1] for k in range(1, len(path))}
    nxt = {path[k]: path[k + 1] for k in range(len(path) - 1)}
    length = truck_duration(instance, giant)
    eligible = set(instance.effective_eligible)

    def entry(v):
        p, s = prev[v], nxt[v]
        saving = t[p, v] + t[v, s] - t[p, s]
        ratio = np.inf if d[v] == 0 else saving / d[v]
        return (-ratio, v)

    version = {}
    heap = []
    for v in giant:
        if v in eligible and d[v] <= target:
            version[v] = 0
            heap.append((*entry(v), 0))
    heapq.heapify(heap)
    removed = []
    while length > target + 1e-9:
        while heap and heap[0][2] != version.get(heap[0][1]):
            heapq.heappop(heap)
        if not heap:
            return None
        _, v, _ = heapq.heappop(heap)
        p, s = prev[v], nxt[v]
        length -= t[p, v] + t[v, s] - t[p, s]
        nxt[p], prev[s] = s, p
        del version[v]
        removed.append(v)
        for w in (p, s):
            if w in version:
                version[w] += 1
                heapq.heappush(heap, (*entry(w), version[w]))
    tour = []
    v = nxt[0]
    while v != last:
        tour.append(v)
        v = nxt[v]
    return tour, removed


def _assemble(instance: Instance, tour, removed) -> Solution:
    d = instance.drone_time
    m = instance.m
    jobs = [float(d[v]) for v in removed]
    trips = [[] for _ in range(m)]
    if removed:
        assignment, _ = lpt_schedule(jobs, m)
        for v, k in zip(removed, assignment):
            trips[k].append(v)
    trips.sort(key=lambda trip: -sum(d[v] for v in trip))
    sol = Solution(tuple(tour), tuple(tuple(sorted(tr)) for tr in trips))
    return sol.with_makespan(instance)


def split(giant: Sequence[int], instance: Instance) -> Solution:
    """Split a giant tour into a truck tour and drone trips.

    Bisection on the target makespan; the best valid solution met along the
    way is returned (the pure truck tour when drones never help).
    """
    if sorted(giant) != list(instance.customers):
        raise ValueError("giant tour must visit every customer once")
    best = _assemble(instance, list(giant), [])
    if not instance.effective_eligible:
        return best
    lo, hi = 0.0, best.makespan
    # target 0 covers instances the drones can serve entirely at no cost
    attempt = _remove_until(instance, giant, lo)
    if attempt is not None:
        cand = _assemble(instance, *attempt)
        if cand.makespan < best.makespan:
            best = cand
    for _ in range(SPLIT_ITERATIONS):
        mid = 0.5 * (lo + hi)
        attempt = _remove_until(instance, giant, mid)
        ok = False
        if attempt is not None:
            cand = _assemble(instance, *attempt)
            ok = cand.makespan <= mid + 1e-9
            if cand.makespan < best.makespan:
                best = cand
        if ok:
            hi = mid
        else:
            lo = mid
    return best


def upper_bound(instance: Instance) -> Solution:
    """Heuristic solution used to seed the branch-and-cut incumbent."""
    return split(build_giant_tour(instance), instance)


def round_lp_point(instance: Instance, y, z) -> Solution:
    """Solution read off a relaxation point.

    Customers with ``y >= 0.5`` (and all truck-only ones) stay on the truck,
    routed by nearest neighbour and 2-opt. The rest fly, each on the drone
    holding its largest ``z`` value or by LPT, whichever gives the smaller
    drone makespan. ``z`` maps an eligible customer to its per-drone values.
    """
    m = instance.m
    d = instance.drone_time
    fly = [i for i in instance.effective_eligible if y[i] < 0.5]
    truck = [i for i in instance.customers if i not in set(fly)]
    tour = two_opt(instance, nearest_neighbor_tour(instance, truck)) if truck else []
    trips = [[] for _ in range(m)]
    if fly:
        by_z = [[] for _ in range(m)]
        for i in fly:
            by_z[int(np.argmax(z[i]))].append(i)
        assignment, span = lpt_schedule([float(d[i]) for i in fly], m)
        if max(sum(d[i] for i in trip) for trip in by_z) <= span:
            trips = by_z
        else:
            for i, k in zip(fly, assignment):
                trips[k].append(i)
    trips.sort(key=lambda trip: -sum(d[v] for v in trip))
    sol = Solution(tuple(tour), tuple(tuple(sorted(tr)) for tr in trips))
    return sol.with_makespan(instance)
