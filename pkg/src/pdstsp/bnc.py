"""Branch-and-cut driver.

Each node re-solves the relaxation, separates violated inequalities and
adds them until none are found (or progress stalls), then branches. Cut
rows are globally valid and shared by all nodes.
"""
from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import heuristics
from .instance import Instance, Solution, SolutionError, evaluate
from .lp import INFEASIBLE, ITERATION_LIMIT, INTEGRALITY_TOL, LinearProgram, LpError
from .model import FAMILIES, Row, VarIndex, build_base
from .separation import (
    build_support,
    find_components,
    is_integral,
    min_cut,
    sec_candidates,
    subtour_sets,
    two_matching_candidates,
)

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE_STATUS = "infeasible"
TIME_LIMIT = "time-limit"


@dataclass
class Params:
    time_limit: float = 10800.0
    mip_gap: float = 1e-6
    node_limit: int | None = None
    ub_hint: float | None = None
    ub_solution: Solution | None = None
    use_heuristic: bool = True
    # LP rounding heuristic before every branching (0 disables)
    rounding_period: int = 1
    # min-cut and 2-matching run at the root and every ``heavy_period``-th node
    heavy_period: int = 8
    tailing_rounds: int = 5
    tailing_tol: float = 1e-6
    max_rounds: int = 500


@dataclass(frozen=True, order=True)
class Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    changes: tuple[tuple[int, float, float], ...] = field(compare=False, default=())


@dataclass
class SolveResult:
    status: str
    solution: Solution | None
    objective: float
    bound: float
    gap: float
    nodes: int
    cuts: dict[str, int]
    time: float
    lp_iterations: int = 0
    trace: list[dict] = field(default_factory=list)
    root_bound: float = float("nan")

    def stats(self) -> dict:
        return {
            "status": self.status,
            "objective": self.objective,
            "bound": self.bound,
            "gap": self.gap,
            "nodes": self.nodes,
            "cuts": dict(self.cuts),
            "time": self.time,
            "lp_iterations": self.lp_iterations,
            "root_bound": self.root_bound,
        }


class CutPool:
    """Canonical keys of every row sent to the LP."""

    def __init__(self):
        self._keys: set[tuple] = set()

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, row: Row) -> bool:
        return row.key() in self._keys

    def add(self, row: Row) -> bool:
        key = row.key()
        if key in self._keys:
            return False
        self._keys.add(key)
        return True


def relative_gap(ub: float, lb: float) -> float:
    if ub == np.inf:
        return np.inf
    if ub == 0:
        return 0.0
    return max(0.0, (ub - lb) / abs(ub))


def choose_branch_column(vi: VarIndex, values, tol: float = INTEGRALITY_TOL) -> int:
    """Most fractional y column, then z, then x; ties to the lowest index."""
    values = np.asarray(values)
    groups = (
        range(vi.y_start, vi.z_start),
        range(vi.z_start, vi.t_max),
        range(0, vi.n_edges),
    )
    for cols in groups:
        if len(cols) == 0:
            continue
        v = values[cols.start:cols.stop]
        frac = np.minimum(v - np.floor(v), np.ceil(v) - v)
        k = int(np.argmax(frac))
        if frac[k] > tol:
            return cols.start + k
    raise ValueError("branching requested on an integral point")


class BranchAndCut:
    def __init__(self, instance: Instance, params: Params | None = None):
        self.params = params or Params()
        self.original = instance
        if instance.m == 0 and instance.eligible:
            instance = instance.without_drones()
        self.instance = instance
        self.vi, base_rows = build_base(instance)
        vi = self.vi
        c = np.zeros(vi.n_cols)
        c[vi.t_max] = 1.0
        self.root_lower = vi.lower.copy()
        self.root_upper = vi.upper.copy()
        self.lp = LinearProgram(c, vi.lower, vi.upper, base_rows)
        self.pool = CutPool()
        for row in base_rows:
            self.pool.add(row)
        self.cut_counts = {f: 0 for f in FAMILIES}
        self.incumbent: Solution | None = None
        self.ub = np.inf
        self.hint_value = np.inf
        self.trace: list[dict] = []
        self.nodes = 0
        self._seq = 0
        self._applied: dict[int, tuple[float, float]] = {}
        self._lb = 0.0
        self._pruned_floor = np.inf
        self._start = 0.0
        self.lp_iterations = 0
        self.root_bound = np.nan

    # -- incumbent ---------------------------------------------------------

    def _offer(self, solution: Solution) -> bool:
        value = evaluate(self.original, solution)
        if value < self.ub:
            self.incumbent = Solution(solution.truck_tour, solution.drone_trips, value)
            self.ub = value
            self._tighten_tmax()
            return True
        return False

    def _tighten_tmax(self):
        cap = min(self.ub, self.hint_value)
        if np.isfinite(cap):
            hi = cap * (1 + 1e-9) + 1e-9
            self.lp.set_bounds(self.vi.t_max, 0.0, hi)
            self.root_upper[self.vi.t_max] = hi

    def _prunable(self, bound: float) -> bool:
        if self.incumbent is not None:
            return bound >= self.ub * (1.0 - self.params.mip_gap)
        if np.isfinite(self.hint_value):
            return bound > self.hint_value + 1e-9 * max(1.0, abs(self.hint_value))
        return False

    # -- tree ------------------------------------------------------------------

    def _node(self, bound, depth, changes) -> Node:
        self._seq += 1
        return Node(bound, self._seq, depth, changes)

    def _apply(self, node: Node):
        wanted = {c: (lo, hi) for c, lo, hi in node.changes}
        reset = [c for c in self._applied if c not in wanted]
        if reset:
            self.lp.set_many_bounds(reset, self.root_lower[reset], self.root_upper[reset])
        cols = sorted(wanted)
        if cols:
            self.lp.set_many_bounds(cols, [wanted[c][0] for c in cols], [wanted[c][1] for c in cols])
        self._applied = wanted

    def _elapsed(self) -> float:
        return time.perf_counter() - self._start

    def _out_of_time(self) -> bool:
        return self._elapsed() >= self.params.time_limit

    def _global_lb(self, heap, current: Node | None = None) -> float:
        """Smallest bound over open nodes, nodes pruned by bound and the
        incumbent; never allowed to decrease."""
        cands = [self._pruned_floor]
        if heap:
            cands.append(heap[0].bound)
        if current is not None:
            cands.append(current.bound)
        if self.incumbent is not None:
            cands.append(self.ub)
        lb = min(cands)
        if np.isfinite(lb):
            self._lb = max(self._lb, lb)
        else:
            self._lb = lb if not np.isfinite(self._lb) else self._lb
        return self._lb

    def _prune(self, bound: float):
        self._pruned_floor = min(self._pruned_floor, bound)

    def solve(self) -> SolveResult:
        p = self.params
        self._start = time.perf_counter()
        if p.ub_solution is not None:
            self._offer(p.ub_solution)
        if p.ub_hint is not None:
            self.hint_value = float(p.ub_hint)
            self._tighten_tmax()
        if p.use_heuristic:
            self._offer(heuristics.upper_bound(self.original))

        heap: list[Node] = []
        dive: Node | None = self._node(0.0, 0, ())
        status = None
        while dive is not None or heap:
            if dive is not None:
                node, dive = dive, None
            else:
                node = heapq.heappop(heap)
            if self._prunable(node.bound):
                self._prune(node.bound)
                self._record(node, "pruned", node.bound, {}, heap, dive)
                continue
            if self._out_of_time() or (p.node_limit is not None and self.nodes >= p.node_limit):
                heapq.heappush(heap, node)
                status = TIME_LIMIT if self._out_of_time() else FEASIBLE
                break
            action, info, children = self._process(node)
            if action == "interrupted":
                heapq.heappush(heap, node)
                self._record(node, action, info["lp"], info, heap, dive)
                status = TIME_LIMIT
                break
            if children:
                down, up, prefer_up = children
                if self.incumbent is None:
                    first, second = (up, down) if prefer_up else (down, up)
                    dive = first
                    heapq.heappush(heap, second)
                else:
                    heapq.heappush(heap, down)
                    heapq.heappush(heap, up)
            self._record(node, action, info["lp"], info, heap, dive)
            if self.incumbent is not None and self._lb >= self.ub * (1 - p.mip_gap):
                break

        if status is None:
            status = OPTIMAL if self.incumbent is not None else INFEASIBLE_STATUS
        elif status == FEASIBLE and self.incumbent is None:
            status = TIME_LIMIT
        lb = self._global_lb(heap, dive)
        return SolveResult(
            status=status,
            solution=self.incumbent,
            objective=self.ub,
            bound=lb,
            gap=relative_gap(self.ub, lb),
            nodes=self.nodes,
            cuts=dict(self.cut_counts),
            time=self._elapsed(),
            lp_iterations=self.lp_iterations,
            trace=self.trace,
            root_bound=self.root_bound,
        )

    def _record(self, node: Node, action: str, lp_value, info, heap, dive):
        rec = {
            "node": node.seq,
            "depth": node.depth,
            "parent_bound": node.bound,
            "lp": lp_value,
            "rounds": info.get("rounds", 0),
            "round_objectives": info.get("objs", []),
            "cuts": info.get("cuts", {}),
            "action": action,
            "lb": self._global_lb(heap, dive),
            "ub": self.ub,
            "time": self._elapsed(),
        }
        if "branch_column" in info:
            rec["branch_column"] = info["branch_column"]
        self.trace.append(rec)

    def _solve_lp(self):
        res = self.lp.solve()
        self.lp_iterations += res.iterations
        if res.status == ITERATION_LIMIT:
            res = self.lp.solve(cold=True)
            self.lp_iterations += res.iterations
            if res.status == ITERATION_LIMIT:
                raise LpError(f"LP iteration limit persists at node with {self.lp.n_rows} rows")
        return res

    def _add_cuts(self, candidates, added: dict) -> int:
        rows = []
        for cand in candidates:
            if self.pool.add(cand.row):
                rows.append(cand.row)
                self.cut_counts[cand.family] += 1
                added[cand.family] = added.get(cand.family, 0) + 1
        self.lp.add_rows(rows)
        return len(rows)

    def _round(self, values):
        vi = self.vi
        y = values[vi.y_start: vi.z_start]
        z = {i: [values[vi.z(i, k)] for k in range(1, vi.drones + 1)] for i in vi.eligible}
        self._offer(heuristics.round_lp_point(self.instance, y, z))

    def process_node(self, node: Node):
        return self._process(node)

    def _process(self, node: Node):
        """Cut rounds at ``node``.

        Returns ``(action, info, children)`` where action is one of pruned,
        infeasible, integer, branched or interrupted and children is
        ``(down, up, prefer_up)`` after branching.
        """
        p = self.params
        vi = self.vi
        self._apply(node)
        self.nodes += 1
        heavy = (self.nodes - 1) % p.heavy_period == 0
        added: dict[str, int] = {}
        objs: list[float] = []
        info = {"cuts": added, "objs": objs, "rounds": 0, "lp": np.nan}
        while True:
            if info["rounds"] and self._out_of_time():
                info["lp"] = objs[-1]
                return "interrupted", info, None
            res = self._solve_lp()
            info["rounds"] += 1
            if res.status == INFEASIBLE:
                info["lp"] = np.inf
                return "infeasible", info, None
            obj = res.objective
            objs.append(obj)
            info["lp"] = obj
            if node.seq == 1:
                self.root_bound = obj
            if self._prunable(obj):
                self._prune(obj)
                return "pruned", info, None
            values = res.values
            g = build_support(vi, values)
            if is_integral(vi, values):
                cuts = sec_candidates(vi, values, subtour_sets(g), integral=True)
                if cuts:
                    if self._add_cuts(cuts, added) == 0:
                        raise LpError("violated lazy SEC already present in the LP")
                    continue
                try:
                    sol = vi.decode(values)
                except SolutionError as exc:
                    raise LpError(f"integral point does not decode: {exc}") from exc
                self._offer(sol)
                self._prune(obj)
                return "integer", info, None

            cuts = sec_candidates(vi, values, subtour_sets(g), integral=False)
            if not cuts and heavy:
                if len(find_components(g)) == 1:
                    S, _ = min_cut(g)
                    cuts = sec_candidates(vi, values, [S], integral=False)
                cuts += two_matching_candidates(vi, values, g)
            stalled = False
            if len(objs) > p.tailing_rounds:
                ref = objs[-1 - p.tailing_rounds]
                stalled = obj - ref < p.tailing_tol * max(1.0, abs(obj))
            if cuts and not stalled and info["rounds"] < p.max_rounds:
                if self._add_cuts(cuts, added):
                    continue
            if p.rounding_period and (self.nodes - 1) % p.rounding_period == 0:
                self._round(values)
            col = choose_branch_column(vi, values)
            bound = max(node.bound, obj)
            base = tuple(ch for ch in node.changes if ch[0] != col)
            down = self._node(bound, node.depth + 1, base + ((col, 0.0, 0.0),))
            up = self._node(bound, node.depth + 1, base + ((col, 1.0, 1.0),))
            info["branch_column"] = vi.column_name(col)
            return "branched", info, (down, up, bool(values[col] >= 0.5))


def solve(instance: Instance, params: Params | None = None, **kw) -> SolveResult:
    """Solve ``instance`` to optimality (within ``mip_gap``) or the limits."""
    if params is None:
        params = Params(**kw)
    elif kw:
        raise TypeError("pass either params or keyword overrides")
    return BranchAndCut(instance, params).solve()
