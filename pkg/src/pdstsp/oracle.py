"""Exact reference solver for small instances.

Every truck/drone partition of the eligible customers is tried: the truck
side is a Held-Karp TSP over the truck customers, the drone side an exact
parallel-machine makespan problem.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .instance import Instance, Solution, evaluate

MAX_N = 14
MAX_M = 4


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleResult:
    makespan: float
    solution: Solution


class HeldKarp:
    """All-subset TSP table over the customers of ``instance``.

    ``cost(mask)`` is the shortest closed truck tour through exactly the
    customers in ``mask`` (bit ``c - 1`` stands for customer ``c``).
    """

    def __init__(self, instance: Instance):
        n = instance.n
        self.n = n
        t = instance.truck_time
        self.dist = np.ascontiguousarray(t[: n + 1, : n + 1])
        self.table = kernels.held_karp_table(self.dist)
        back = self.dist[1:, 0]
        self.costs = np.min(self.table + back[None, :], axis=1)
        self.costs[0] = 0.0

    def cost(self, mask: int) -> float:
        return float(self.costs[mask])

    def tour(self, mask: int) -> tuple[int, ...]:
        if mask == 0:
            return ()
        d = self.dist
        dp = self.table
        j = int(np.argmin(dp[mask] + d[1:, 0]))
        order = [j]
        while mask != (1 << j):
            prev_mask = mask ^ (1 << j)
            target = dp[mask, j]
            cand = dp[prev_mask] + d[1:, j + 1]
            i = next(i for i in range(self.n) if (prev_mask >> i) & 1 and cand[i] == target)
            order.append(i)
            mask, j = prev_mask, i
        return tuple(c + 1 for c in reversed(order))


def held_karp(instance: Instance) -> tuple[float, tuple[int, ...]]:
    """Optimal pure-truck tour over all customers."""
    if instance.n > 20:
        raise OracleError("Held-Karp limited to n <= 20")
    hk = HeldKarp(instance)
    full = (1 << instance.n) - 1
    return hk.cost(full), hk.tour(full)


def lpt_bound(jobs: Sequence[float], m: int) -> float:
    if not jobs:
        return 0.0
    return max(max(jobs), sum(jobs) / m)


def pms_exact(jobs: Sequence[float], m: int, upper: float = np.inf):
    """Minimum makespan of ``jobs`` on ``m`` identical machines.

    Only schedules strictly below ``upper`` are searched for; returns
    ``(makespan, assignment)`` with ``assignment[j]`` the machine of job
    ``j``, or ``(upper, None)`` when no schedule beats ``upper``.
    """
    jobs = [float(p) for p in jobs]
    if not jobs:
        return (0.0, []) if upper > 0 else (upper, None)
    if m < 1:
        raise OracleError("need at least one machine")
    order = sorted(range(len(jobs)), key=lambda j: (-jobs[j], j))
    sizes = [jobs[j] for j in order]
    suffix = np.concatenate([np.cumsum(sizes[::-1])[::-1], [0.0]]).tolist()
    # LPT start
    loads = [0.0] * m
    lpt_assign = [0] * len(jobs)
    for j in order:
        k = min(range(m), key=lambda q: (loads[q], q))
        loads[k] += jobs[j]
        lpt_assign[j] = k
    best = upper
    best_assign = None
    if max(loads) < upper:
        best = max(loads)
        best_assign = list(lpt_assign)
    lower = lpt_bound(jobs, m)
    if best <= lower:
        return best, best_assign

    loads = [0.0] * m
    current = [0] * len(jobs)

    def dfs(pos: int, cur_max: float) -> bool:
        nonlocal best, best_assign
        if pos == len(sizes):
            if cur_max < best:
                best = cur_max
                best_assign = [0] * len(jobs)
                for p, j in enumerate(order):
                    best_assign[j] = current[p]
                return best <= lower
            return False
        if max(cur_max, (sum(loads) + suffix[pos]) / m) >= best:
            return False
        tried = set()
        p = sizes[pos]
        for k in range(m):
            if loads[k] in tried:
                continue
            tried.add(loads[k])
            new_load = loads[k] + p
            if new_load >= best:
                continue
            loads[k] = new_load
            current[pos] = k
            done = dfs(pos + 1, max(cur_max, new_load))
            loads[k] -= p
            if done:
                return True
        return False

    dfs(0, 0.0)
    return best, best_assign


def solve_exact(instance: Instance) -> OracleResult:
    if instance.n > MAX_N:
        raise OracleError(f"oracle refuses n = {instance.n} > {MAX_N}")
    if instance.m > MAX_M:
        raise OracleError(f"oracle refuses m = {instance.m} > {MAX_M}")
    n, m = instance.n, instance.m
    hk = HeldKarp(instance)
    full = (1 << n) - 1
    eligible = list(instance.effective_eligible)
    d = instance.drone_time
    best = hk.cost(full)
    best_key = (0, None)
    for sub in range(1, 1 << len(eligible)):
        drone_set = [eligible[b] for b in range(len(eligible)) if (sub >> b) & 1]
        mask = full
        for c in drone_set:
            mask ^= 1 << (c - 1)
        truck = hk.cost(mask)
        if truck >= best:
            continue
        jobs = [float(d[c]) for c in drone_set]
        if lpt_bound(jobs, m) >= best:
            continue
        span, assign = pms_exact(jobs, m, upper=best)
        if assign is None:
            continue
        value = max(truck, span)
        if value < best:
            best = value
            best_key = (sub, (drone_set, assign))
    sub, payload = best_key
    trips = [[] for _ in range(m)]
    mask = full
    if payload is not None:
        drone_set, assign = payload
        for c, k in zip(drone_set, assign):
            trips[k].append(c)
            mask ^= 1 << (c - 1)
    # heaviest drone first, matching the solver's symmetry convention
    trips.sort(key=lambda trip: -sum(d[c] for c in trip))
    solution = Solution(hk.tour(mask), tuple(tuple(tr) for tr in trips))
    return OracleResult(evaluate(instance, solution), solution.with_makespan(instance))
