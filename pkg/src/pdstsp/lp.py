"""Bounded-variable LP relaxations with warm restarts.

The engine is HiGHS' dual simplex driven through ``highspy``. A
``LinearProgram`` keeps one solver instance alive, so adding rows or
changing column bounds re-optimizes from the previous basis.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import highspy
import numpy as np

from .model import EQ, GE, LE, Row

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
ITERATION_LIMIT = "iteration-limit"

FEASIBILITY_TOL = 1e-9
OPTIMALITY_TOL = 1e-7
INTEGRALITY_TOL = 1e-6

INF = highspy.kHighsInf


class LpError(RuntimeError):
    pass


@dataclass(frozen=True)
class LpResult:
    status: str
    objective: float
    values: np.ndarray
    iterations: int
    warm: bool

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _row_bounds(row: Row) -> tuple[float, float]:
    if row.sense == LE:
        return -INF, row.rhs
    if row.sense == GE:
        return row.rhs, INF
    return row.rhs, row.rhs


class LinearProgram:
    """``min c.x`` subject to rows and column bounds.

    ``iteration_factor`` sets the simplex iteration limit to
    ``iteration_factor * (rows + cols)`` for every solve.
    """

    def __init__(self, objective, lower, upper, rows: Iterable[Row] = (),
                 iteration_factor: int = 50):
        self.n_cols = len(objective)
        self.objective = np.asarray(objective, dtype=np.float64)
        self.lower = np.asarray(lower, dtype=np.float64).copy()
        self.upper = np.asarray(upper, dtype=np.float64).copy()
        self.iteration_factor = iteration_factor
        self.rows: list[Row] = []
        self._crossed: set[int] = set()
        h = highspy.Highs()
        for name, value in (
            ("output_flag", False),
            ("presolve", "off"),
            ("solver", "simplex"),
            ("simplex_strategy", 1),  # dual simplex
            ("threads", 1),
            ("random_seed", 0),
            ("primal_feasibility_tolerance", FEASIBILITY_TOL),
            ("dual_feasibility_tolerance", OPTIMALITY_TOL),
        ):
            h.setOptionValue(name, value)
        h.addCols(
            self.n_cols,
            self.objective,
            np.where(np.isinf(self.lower), -INF, self.lower),
            np.where(np.isinf(self.upper), INF, self.upper),
            0,
            np.zeros(0, dtype=np.int32),
            np.zeros(0, dtype=np.int32),
            np.zeros(0, dtype=np.float64),
        )
        self._h = h
        self._solved_once = False
        self.add_rows(rows)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_rows(self, rows: Iterable[Row]) -> None:
        rows = list(rows)
        if not rows:
            return
        lo = np.empty(len(rows))
        hi = np.empty(len(rows))
        starts = np.empty(len(rows), dtype=np.int32)
        idx: list[int] = []
        val: list[float] = []
        for r, row in enumerate(rows):
            if row.cols and (min(row.cols) < 0 or max(row.cols) >= self.n_cols):
                raise LpError("row references a missing column")
            lo[r], hi[r] = _row_bounds(row)
            starts[r] = len(idx)
            idx.extend(row.cols)
            val.extend(row.vals)
        self._h.addRows(
            len(rows), lo, hi, len(idx), starts,
            np.asarray(idx, dtype=np.int32), np.asarray(val, dtype=np.float64),
        )
        self.rows.extend(rows)

    def set_bounds(self, col: int, lo: float, hi: float) -> None:
        self.set_many_bounds([col], [lo], [hi])

    def set_many_bounds(self, cols, lo, hi) -> None:
        cols = np.asarray(cols, dtype=np.int32)
        if cols.size == 0:
            return
        lo = np.asarray(lo, dtype=np.float64)
        hi = np.asarray(hi, dtype=np.float64)
        self.lower[cols] = lo
        self.upper[cols] = hi
        for c, a, b in zip(cols.tolist(), lo.tolist(), hi.tolist()):
            if a > b:
                self._crossed.add(c)
            else:
                self._crossed.discard(c)
        ok = lo <= hi
        if ok.any():
            self._h.changeColsBounds(
                int(ok.sum()), cols[ok],
                np.where(np.isinf(lo[ok]), -INF, lo[ok]),
                np.where(np.isinf(hi[ok]), INF, hi[ok]),
            )

    def solve(self, cold: bool = False) -> LpResult:
        """Re-optimize. Falls back to a cold start once if the warm start hits
        the iteration limit."""
        if self._crossed:
            return LpResult(INFEASIBLE, np.inf, np.full(self.n_cols, np.nan), 0, False)
        warm = self._solved_once and not cold
        result = self._run(cold)
        if result.status == ITERATION_LIMIT and warm:
            result = self._run(cold=True)
        return result

    def _run(self, cold: bool) -> LpResult:
        h = self._h
        if cold:
            h.clearSolver()
        limit = self.iteration_factor * (self.n_rows + self.n_cols)
        h.setOptionValue("simplex_iteration_limit", int(limit))
        warm = self._solved_once and not cold
        h.run()
        self._solved_once = True
        status = h.getModelStatus()
        iters = int(h.getInfo().simplex_iteration_count)
        ms = highspy.HighsModelStatus
        if status == ms.kOptimal:
            values = np.array(h.getSolution().col_value)
            return LpResult(OPTIMAL, float(h.getInfo().objective_function_value), values, iters, warm)
        if status in (ms.kInfeasible, ms.kUnboundedOrInfeasible):
            return LpResult(INFEASIBLE, np.inf, np.full(self.n_cols, np.nan), iters, warm)
        if status == ms.kIterationLimit:
            return LpResult(ITERATION_LIMIT, np.nan, np.full(self.n_cols, np.nan), iters, warm)
        raise LpError(f"LP solve failed with status {h.modelStatusToString(status)}")

    def basis(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        b = self._h.getBasis()
        return (tuple(int(s) for s in b.col_status), tuple(int(s) for s in b.row_status))

    def residuals(self, values) -> np.ndarray:
        """Per-row violation of ``values`` (positive when infeasible)."""
        return np.array([r.violation(values) for r in self.rows])

    def write(self, path) -> None:
        """Dump the current LP in CPLEX LP text format."""
        self._h.writeModel(str(path))


def solve_lp(objective, lower, upper, rows: Iterable[Row]) -> LpResult:
    """One-shot convenience wrapper."""
    return LinearProgram(objective, lower, upper, rows).solve()
