"""Undirected-edge MILP for the PDSTSP.

Columns are laid out as ``x`` (one per edge ``i < j`` of ``V``), then ``y``
(one per vertex, the depot and its copy fixed to 1 by equality rows), then
``z`` (one per eligible customer and drone) and finally ``t_max``.

Cut family tags and the rows they stand for::

    SEC-cut      cut(S) >= 2 y_k                (anchor k)
    SEC-in       x(E(S)) <= y(S) - y_l          (anchor l)
    SEC-in-sum   |S| x(E(S)) <= (|S|-1) y(S)
    SEC-cut-sum  |S| cut(S) >= 2 y(S)
    SEC-cut-Vt   cut(S) >= 2                    (S meets the truck-only set)
    SEC-in-Vt    x(E(S)) <= y(S) - 1            (S meets the truck-only set)
    2MC          x(E(H)) + x(E') <= y(H) + (|H'|-1)/2
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .instance import Instance, Solution, SolutionError

LE, GE, EQ = "<=", ">=", "="

SEC_FAMILIES = ("SEC-cut", "SEC-in", "SEC-in-sum", "SEC-cut-sum", "SEC-cut-Vt", "SEC-in-Vt")
FAMILIES = SEC_FAMILIES + ("2MC",)

# equivalent pairs: the first member is the crossing-edge form
SEC_PAIRS = {
    "integer": ("SEC-cut", "SEC-in"),
    "fractional": ("SEC-cut-sum", "SEC-in-sum"),
    "truck": ("SEC-cut-Vt", "SEC-in-Vt"),
}


class ModelError(ValueError):
    """Raised when a row builder's preconditions fail."""


@dataclass(frozen=True)
class Row:
    cols: tuple[int, ...]
    vals: tuple[float, ...]
    sense: str
    rhs: float

    def __post_init__(self):
        if len(set(self.cols)) != len(self.cols):
            raise ModelError("duplicate column in row")
        if not all(np.isfinite(self.vals)) or not np.isfinite(self.rhs):
            raise ModelError("row coefficients must be finite")
        if self.sense not in (LE, GE, EQ):
            raise ModelError(f"bad sense {self.sense!r}")

    def activity(self, values) -> float:
        values = np.asarray(values)
        return float(np.dot(values[list(self.cols)], self.vals)) if self.cols else 0.0

    def violation(self, values) -> float:
        """How far ``values`` is from satisfying the row (<= 0 when satisfied)."""
        a = self.activity(values)
        if self.sense == LE:
            return a - self.rhs
        if self.sense == GE:
            return self.rhs - a
        return abs(a - self.rhs)

    def key(self) -> tuple:
        order = np.argsort(self.cols, kind="stable")
        return (
            tuple(self.cols[i] for i in order),
            tuple(round(self.vals[i], 12) for i in order),
            self.sense,
            round(self.rhs, 12),
        )

    @property
    def positive_count(self) -> int:
        return sum(1 for v in self.vals if v > 0)


def _row(coef: dict[int, float], sense: str, rhs: float) -> Row:
    items = sorted((c, v) for c, v in coef.items() if v != 0)
    return Row(tuple(c for c, _ in items), tuple(float(v) for _, v in items), sense, float(rhs))


class VarIndex:
    """Column map for one instance."""

    def __init__(self, instance: Instance):
        self.instance = instance
        n = instance.n
        self.n_vertices = n + 2
        self.edges: list[tuple[int, int]] = list(combinations(range(n + 2), 2))
        self.edge_i = np.array([e[0] for e in self.edges], dtype=np.int64)
        self.edge_j = np.array([e[1] for e in self.edges], dtype=np.int64)
        self.n_edges = len(self.edges)
        self._x = {e: c for c, e in enumerate(self.edges)}
        self.y_start = self.n_edges
        self.eligible = instance.effective_eligible
        self.drones = instance.m if self.eligible else 0
        self.z_start = self.y_start + n + 2
        self._z = {}
        col = self.z_start
        for i in self.eligible:
            for k in range(1, self.drones + 1):
                self._z[i, k] = col
                col += 1
        self.t_max = col
        self.n_cols = col + 1
        self.lower = np.zeros(self.n_cols)
        self.upper = np.ones(self.n_cols)
        self.upper[self.t_max] = np.inf
        # vertex -> incident edge columns
        inc = [[] for _ in range(n + 2)]
        for c, (i, j) in enumerate(self.edges):
            inc[i].append(c)
            inc[j].append(c)
        self.incident = [tuple(cols) for cols in inc]

    def x(self, i: int, j: int) -> int:
        if i > j:
            i, j = j, i
        try:
            return self._x[i, j]
        except KeyError:
            raise ModelError(f"no edge ({i}, {j})") from None

    def y(self, i: int) -> int:
        if not 0 <= i < self.n_vertices:
            raise ModelError(f"no vertex {i}")
        return self.y_start + i

    def z(self, i: int, k: int) -> int:
        try:
            return self._z[i, k]
        except KeyError:
            raise ModelError(f"no drone column for customer {i}, drone {k}") from None

    @property
    def integer_cols(self) -> range:
        return range(self.t_max)

    def column_kind(self, col: int) -> str:
        if col < self.y_start:
            return "x"
        if col < self.z_start:
            return "y"
        if col < self.t_max:
            return "z"
        return "t_max"

    def column_name(self, col: int) -> str:
        kind = self.column_kind(col)
        if kind == "x":
            return "x_%d_%d" % self.edges[col]
        if kind == "y":
            return f"y_{col - self.y_start}"
        if kind == "z":
            i, k = next(key for key, c in self._z.items() if c == col)
            return f"z_{i}_{k}"
        return "t_max"

    # -- set helpers -------------------------------------------------------

    def inside_edges(self, S: Iterable[int]) -> list[int]:
        S = sorted(S)
        return [self._x[i, j] for i, j in combinations(S, 2)]

    def crossing_edges(self, S: Iterable[int]) -> list[int]:
        inside = set(S)
        cols = []
        for v in inside:
            for c in self.incident[v]:
                i, j = self.edges[c]
                if (i in inside) != (j in inside):
                    cols.append(c)
        return sorted(cols)

    # -- encoding / decoding ---------------------------------------------

    def encode(self, solution: Solution) -> np.ndarray:
        """Column vector of a (validated) solution."""
        inst = self.instance
        v = np.zeros(self.n_cols)
        path = [0, *solution.truck_tour, inst.n + 1]
        for a, b in zip(path, path[1:]):
            v[self.x(a, b)] = 1.0
        v[self.y(0)] = v[self.y(inst.n + 1)] = 1.0
        for i in solution.truck_tour:
            v[self.y(i)] = 1.0
        loads = []
        for k, trip in enumerate(solution.drone_trips, start=1):
            for i in trip:
                v[self.z(i, k)] = 1.0
            loads.append(sum(inst.drone_time[i] for i in trip))
        truck = sum(inst.truck_time[a, b] for a, b in zip(path, path[1:]))
        v[self.t_max] = max([truck, *loads])
        return v

    def decode(self, values, tol: float = 1e-6) -> Solution:
        """Read a Solution off an integral point; raises SolutionError on
        subtours or other inconsistencies."""
        values = np.asarray(values)
        inst = self.instance
        n = inst.n
        chosen = np.flatnonzero(values[: self.n_edges] > 0.5)
        adj: dict[int, list[int]] = {v: [] for v in range(n + 2)}
        for c in chosen:
            i, j = self.edges[c]
            adj[i].append(j)
            adj[j].append(i)
        tour = []
        prev, cur = None, 0
        while True:
            nxt = [w for w in adj[cur] if w != prev]
            if cur != 0 and len(adj[cur]) != 2:
                raise SolutionError(f"vertex {cur} has truck degree {len(adj[cur])}", cur)
            if cur == 0 and len(adj[0]) != 1:
                raise SolutionError("depot must have truck degree 1", 0)
            prev, cur = cur, nxt[0]
            if cur == n + 1:
                break
            if cur in tour:
                raise SolutionError(f"truck revisits {cur}", cur)
            tour.append(cur)
        on_truck = set(tour)
        for v in range(1, n + 1):
            if v not in on_truck and adj[v]:
                raise SolutionError(f"customer {v} lies on a subtour", v)
        trips = []
        for k in range(1, inst.m + 1):
            if self.drones:
                trips.append(tuple(i for i in self.eligible if values[self._z[i, k]] > 0.5))
            else:
                trips.append(())
        return Solution(tuple(tour), tuple(trips))


# ---------------------------------------------------------------------------
# base model
# ---------------------------------------------------------------------------

def build_base(instance: Instance) -> tuple[VarIndex, list[Row]]:
    """Columns and the base rows; the objective is ``min t_max``.

    Rows, in order: truck time bound, eligible assignment, fixed truck
    visits (truck-only customers, depot, copy), depot and copy degree,
    customer degree, edge/visit linking (two per edge), drone symmetry
    breaking (drones 2..m) and the first drone's time bound.
    """
    if instance.m == 0 and instance.eligible:
        raise ModelError("m = 0 with drone-eligible customers: normalize with without_drones()")
    vi = VarIndex(instance)
    n = instance.n
    t = instance.truck_time
    d = instance.drone_time
    rows: list[Row] = []

    coef = {vi.t_max: 1.0}
    for c, (i, j) in enumerate(vi.edges):
        coef[c] = -float(t[i, j])
    rows.append(_row(coef, GE, 0.0))

    for i in vi.eligible:
        coef = {vi.y(i): 1.0}
        for k in range(1, vi.drones + 1):
            coef[vi.z(i, k)] = 1.0
        rows.append(_row(coef, EQ, 1.0))
    for i in [*instance.truck_only, 0, n + 1] if vi.drones else [*instance.customers, 0, n + 1]:
        rows.append(_row({vi.y(i): 1.0}, EQ, 1.0))

    rows.append(_row({c: 1.0 for c in vi.incident[0]}, EQ, 1.0))
    rows.append(_row({c: 1.0 for c in vi.incident[n + 1]}, EQ, 1.0))

    for j in instance.customers:
        coef = {c: 1.0 for c in vi.incident[j]}
        coef[vi.y(j)] = -2.0
        rows.append(_row(coef, EQ, 0.0))

    for c, (i, j) in enumerate(vi.edges):
        rows.append(_row({c: 1.0, vi.y(i): -1.0}, LE, 0.0))
        rows.append(_row({c: 1.0, vi.y(j): -1.0}, LE, 0.0))

    for k in range(2, vi.drones + 1):
        coef = {}
        for i in vi.eligible:
            coef[vi.z(i, k - 1)] = float(d[i])
            coef[vi.z(i, k)] = -float(d[i])
        rows.append(_row(coef, GE, 0.0))
    if vi.drones:
        coef = {vi.t_max: 1.0}
        for i in vi.eligible:
            coef[vi.z(i, 1)] = -float(d[i])
        rows.append(_row(coef, GE, 0.0))
    return vi, rows


def expected_base_rows(instance: Instance) -> int:
    n, m = instance.n, instance.m
    n_edges = (n + 2) * (n + 1) // 2
    return 1 + n + 2 + 2 + n + 2 * n_edges + ((m - 1) + 1 if m and instance.eligible else 0)


# ---------------------------------------------------------------------------
# subtour elimination rows
# ---------------------------------------------------------------------------

def _check_sec_set(S, vi: VarIndex) -> tuple[int, ...]:
    S = tuple(sorted(set(int(v) for v in S)))
    if len(S) < 3:
        raise ModelError(f"SEC needs |S| >= 3, got {len(S)}")
    if S[0] < 1 or S[-1] > vi.instance.n:
        raise ModelError("SEC set must contain customers only")
    return S


def sec_row(family: str, S: Sequence[int], vi: VarIndex, anchor: int | None = None) -> Row:
    """Build one subtour elimination row of the given family over ``S``."""
    S = _check_sec_set(S, vi)
    size = len(S)
    if family in ("SEC-cut", "SEC-in"):
        if anchor is None or anchor not in S:
            raise ModelError(f"{family} needs an anchor vertex in S")
    if family in ("SEC-cut-Vt", "SEC-in-Vt") and not set(S) & set(vi.instance.truck_only) and vi.drones:
        raise ModelError(f"{family} requires S to contain a truck-only customer")
    if family == "SEC-cut":
        coef = {c: 1.0 for c in vi.crossing_edges(S)}
        coef[vi.y(anchor)] = -2.0
        return _row(coef, GE, 0.0)
    if family == "SEC-in":
        coef = {c: 1.0 for c in vi.inside_edges(S)}
        for k in S:
            if k != anchor:
                coef[vi.y(k)] = -1.0
        return _row(coef, LE, 0.0)
    if family == "SEC-in-sum":
        coef = {c: float(size) for c in vi.inside_edges(S)}
        for k in S:
            coef[vi.y(k)] = -float(size - 1)
        return _row(coef, LE, 0.0)
    if family == "SEC-cut-sum":
        coef = {c: float(size) for c in vi.crossing_edges(S)}
        for k in S:
            coef[vi.y(k)] = -2.0
        return _row(coef, GE, 0.0)
    if family == "SEC-cut-Vt":
        return _row({c: 1.0 for c in vi.crossing_edges(S)}, GE, 2.0)
    if family == "SEC-in-Vt":
        coef = {c: 1.0 for c in vi.inside_edges(S)}
        for k in S:
            coef[vi.y(k)] = -1.0
        return _row(coef, LE, -1.0)
    raise ModelError(f"unknown SEC family {family!r}")


def crossing_count(size: int, n: int) -> int:
    return size * (n + 2 - size)


def inside_count(size: int) -> int:
    return size * (size - 1) // 2


def sec_kind(S: Sequence[int], vi: VarIndex, integral: bool) -> str:
    if vi.drones == 0 or set(S) & set(vi.instance.truck_only):
        return "truck"
    return "integer" if integral else "fractional"


def lighter_family(S: Sequence[int], vi: VarIndex, integral: bool = True) -> str:
    """Pick the member of the applicable equivalent pair whose left-hand side
    has fewer positive coefficients (the inside form on ties)."""
    cut_form, inside_form = SEC_PAIRS[sec_kind(S, vi, integral)]
    size = len(set(S))
    if crossing_count(size, vi.instance.n) < inside_count(size):
        return cut_form
    return inside_form


def anchor_vertex(S: Sequence[int], y_values=None) -> int:
    """Vertex of S with the largest y value, ties to the smallest index."""
    S = sorted(S)
    if y_values is None:
        return S[0]
    return max(S, key=lambda v: (y_values[v], -v))


def sec_rows(S: Sequence[int], vi: VarIndex, values=None, integral: bool = True) -> tuple[str, Row]:
    """The lighter SEC for ``S`` at the point ``values`` (full column vector)."""
    S = _check_sec_set(S, vi)
    family = lighter_family(S, vi, integral)
    anchor = None
    if family in ("SEC-cut", "SEC-in"):
        y_values = None
        if values is not None:
            values = np.asarray(values)
            y_values = {v: values[vi.y(v)] for v in S}
        anchor = anchor_vertex(S, y_values)
    return family, sec_row(family, S, vi, anchor)


# ---------------------------------------------------------------------------
# 2-matching rows
# ---------------------------------------------------------------------------

def check_two_matching_support(H, H_prime, E_prime, vi: VarIndex) -> None:
    n = vi.instance.n
    H = set(H)
    Hp = set(H_prime)
    if not H or min(H) < 1 or max(H) > n:
        raise ModelError("handle H must be a nonempty set of customers")
    if not Hp <= H:
        raise ModelError("H' must be a subset of H")
    if len(Hp) < 3 or len(Hp) % 2 == 0:
        raise ModelError("|H'| must be odd and at least 3")
    ends_in = []
    seen_ends = set()
    for a, b in E_prime:
        if a == b or not (0 <= a <= n + 1 and 0 <= b <= n + 1):
            raise ModelError(f"({a}, {b}) is not an edge")
        if a in H and b in H:
            raise ModelError(f"edge ({a}, {b}) has both endpoints in H")
        if (a in Hp) == (b in Hp):
            raise ModelError(f"edge ({a}, {b}) needs exactly one endpoint in H'")
        if a in seen_ends or b in seen_ends:
            raise ModelError(f"edge ({a}, {b}) shares an endpoint")
        seen_ends.update((a, b))
        ends_in.append(a if a in Hp else b)
    if sorted(ends_in) != sorted(Hp):
        raise ModelError("every vertex of H' must end exactly one edge of E'")


def two_matching_row(H, H_prime, E_prime, vi: VarIndex) -> Row:
    check_two_matching_support(H, H_prime, E_prime, vi)
    coef = {c: 1.0 for c in vi.inside_edges(H)}
    for a, b in E_prime:
        coef[vi.x(a, b)] = 1.0
    for j in H:
        coef[vi.y(j)] = -1.0
    return _row(coef, LE, (len(set(H_prime)) - 1) / 2.0)


@dataclass(frozen=True)
class CutCandidate:
    family: str
    support: tuple
    row: Row
    violation: float
