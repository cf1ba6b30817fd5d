import math

import numpy as np
import pytest

from pdstsp import bnc
from pdstsp.instance import Instance, Solution, SolutionError, random_instance
from pdstsp.lp import solve_lp
from pdstsp.model import (
    FAMILIES,
    GE,
    LE,
    ModelError,
    Row,
    VarIndex,
    anchor_vertex,
    build_base,
    crossing_count,
    expected_base_rows,
    inside_count,
    lighter_family,
    sec_row,
    sec_rows,
    two_matching_row,
)

import reference


def line_instance(n, eligible=(), drone=None, m=1):
    pos = np.arange(n + 2, dtype=float)
    pos[-1] = 0
    t = np.abs(pos[:, None] - pos[None, :])
    return Instance.from_arrays(t, drone or {}, eligible, m=m)


class TestVarIndex:
    def test_bijective(self):
        vi = VarIndex(random_instance(5, 2, 60, seed=0))
        names = [vi.column_name(c) for c in range(vi.n_cols)]
        assert len(set(names)) == vi.n_cols
        assert vi.t_max == vi.n_cols - 1

    def test_x_symmetric_lookup(self):
        vi = VarIndex(random_instance(4, 1, 50, seed=0))
        assert vi.x(3, 1) == vi.x(1, 3)
        with pytest.raises(ModelError):
            vi.x(2, 2)

    def test_z_only_for_eligible(self):
        inst = random_instance(6, 2, 50, seed=1)
        vi = VarIndex(inst)
        assert vi.n_cols == vi.z_start + 2 * len(inst.eligible) + 1
        with pytest.raises(ModelError):
            vi.z(inst.truck_only[0], 1)

    def test_bounds(self):
        vi = VarIndex(random_instance(4, 1, 50, seed=0))
        assert np.all(vi.lower == 0)
        assert np.all(vi.upper[:-1] == 1) and math.isinf(vi.upper[-1])

    def test_encode_decode_round_trip(self):
        inst = random_instance(6, 2, 50, seed=5)
        vi = VarIndex(inst)
        el = inst.eligible
        sol = Solution(tuple(c for c in inst.customers if c not in el[:2]), ((el[0],), (el[1],)))
        back = vi.decode(vi.encode(sol))
        assert back.truck_tour in (sol.truck_tour, sol.truck_tour[::-1])
        assert sorted(map(sorted, back.drone_trips)) == sorted(map(sorted, sol.drone_trips))

    def test_decode_rejects_subtour(self):
        inst = random_instance(5, 1, 0, seed=0)
        vi = VarIndex(inst)
        v = np.zeros(vi.n_cols)
        for a, b in [(0, 1), (1, 2), (2, 6), (3, 4), (4, 5), (3, 5)]:
            v[vi.x(a, b)] = 1
        for j in range(7):
            v[vi.y(j)] = 1
        with pytest.raises(SolutionError):
            vi.decode(v)


class TestBase:
    def test_row_count_n5_m2(self):
        inst = random_instance(5, 2, 60, seed=0)
        vi, rows = build_base(inst)
        n_vd, n_vt = len(inst.eligible), len(inst.truck_only)
        pairs = 7 * 6 // 2
        assert len(rows) == 1 + n_vd + n_vt + 2 + 2 + 5 + 2 * pairs + (2 - 1) + 1
        assert len(rows) == expected_base_rows(inst)

    def test_single_truck_customer(self):
        inst = line_instance(1)
        vi, rows = build_base(inst)
        c = np.zeros(vi.n_cols)
        c[vi.t_max] = 1
        res = solve_lp(c, vi.lower, vi.upper, rows)
        t = inst.truck_time
        assert res.objective == pytest.approx(t[0, 1] + t[1, 2])

    def test_two_drone_customers_lp(self):
        t = np.array([[0, 10, 10, 0], [10, 0, 14, 10], [10, 14, 0, 10], [0, 10, 10, 0]], float)
        inst = Instance.from_arrays(t, {1: 1.0, 2: 2.0}, [1, 2], m=2)
        vi, rows = build_base(inst)
        c = np.zeros(vi.n_cols)
        c[vi.t_max] = 1
        res = solve_lp(c, vi.lower, vi.upper, rows)
        # the relaxation may route a sliver of each customer by truck, so it
        # only bounds the optimum max(t'_1, t'_2) from below
        optimum = reference.brute_force_pdstsp(inst)
        assert optimum == 2.0
        assert res.objective <= optimum + 1e-9
        assert bnc.solve(inst).objective == pytest.approx(optimum, rel=1e-9)

    def test_m0_with_eligible_is_model_error(self):
        inst = random_instance(4, 1, 50, seed=0)
        broken = Instance(n=4, m=0, truck_time=inst.truck_time, eligible=inst.eligible,
                          drone_time=inst.drone_time)
        with pytest.raises(ModelError):
            build_base(broken)

    def test_feasible_points_satisfy_base_rows(self):
        inst = random_instance(5, 2, 60, seed=3)
        vi, rows = build_base(inst)
        el = inst.eligible
        sol = Solution(tuple(c for c in inst.customers if c != el[0]), ((el[0],), ()))
        v = vi.encode(sol.with_makespan(inst))
        assert max(r.violation(v) for r in rows) <= 1e-9


class TestSecRows:
    def test_counting_small_set(self):
        # |S| = 3 with n = 10: inside form has 3 edges, crossing 3 * 9 = 27
        assert inside_count(3) == 3 and crossing_count(3, 10) == 27
        inst = random_instance(10, 1, 50, seed=0)
        vi = VarIndex(inst)
        S = (inst.truck_only[0], *inst.eligible[:2])
        assert lighter_family(S, vi) == "SEC-in-Vt"
        fam, row = sec_rows(S, vi)
        assert fam == "SEC-in-Vt" and row.positive_count == 3

    def test_counting_large_set(self):
        inst = random_instance(10, 1, 50, seed=0)
        vi = VarIndex(inst)
        S = tuple(range(1, 10))
        assert crossing_count(9, 10) < inside_count(9)
        assert lighter_family(S, vi) == "SEC-cut-Vt"

    def test_all_drone_set_uses_integer_pair(self):
        inst = random_instance(8, 2, 100, seed=0)
        vi = VarIndex(inst)
        assert lighter_family((1, 2, 3), vi, integral=True) == "SEC-in"
        assert lighter_family((1, 2, 3), vi, integral=False) == "SEC-in-sum"
        # |S| = 7 of n = 8: 21 crossing against 21 inside edges, a tie
        assert lighter_family(tuple(range(1, 8)), vi, integral=True) == "SEC-in"
        big = VarIndex(random_instance(10, 2, 100, seed=0))
        assert lighter_family(tuple(range(1, 10)), big, integral=True) == "SEC-cut"
        assert lighter_family(tuple(range(1, 10)), big, integral=False) == "SEC-cut-sum"

    def test_no_drones_uses_truck_pair(self):
        vi = VarIndex(random_instance(6, 1, 0, seed=0))
        assert lighter_family((1, 2, 3), vi) == "SEC-in-Vt"

    def test_anchor_is_argmax_y_ties_low(self):
        assert anchor_vertex([4, 2, 7], {4: 0.5, 2: 0.9, 7: 0.9}) == 2
        assert anchor_vertex([4, 2, 7], {4: 1.0, 2: 0.9, 7: 0.9}) == 4

    def test_small_set_rejected(self):
        vi = VarIndex(random_instance(5, 1, 50, seed=0))
        with pytest.raises(ModelError, match=">= 3"):
            sec_rows((1, 2), vi)

    def test_truck_family_needs_truck_vertex(self):
        inst = random_instance(6, 1, 50, seed=0)
        vi = VarIndex(inst)
        with pytest.raises(ModelError):
            sec_row("SEC-cut-Vt", inst.eligible, vi)

    def test_pairs_differ_by_degree_identity(self):
        # with the degree rows tight, cut(S) = 2 y(S) - 2 x(E(S)); the pairs'
        # violations are then fixed multiples of each other
        inst = random_instance(7, 1, 100, seed=2)
        vi = VarIndex(inst)
        rng = np.random.default_rng(0)
        pts = reference.subtour_xy_points(inst, rng, 50)
        S = (1, 2, 3, 4)
        for p in pts:
            v = np.zeros(vi.n_cols)
            v[: len(p)] = p
            r8, r17 = sec_row("SEC-cut", S, vi, 1), sec_row("SEC-in", S, vi, 1)
            assert r8.violation(v) == pytest.approx(2 * r17.violation(v))
            r19, r18 = sec_row("SEC-cut-sum", S, vi), sec_row("SEC-in-sum", S, vi)
            assert r19.violation(v) == pytest.approx(2 * r18.violation(v))


class TestTwoMatching:
    def test_rhs_three_teeth(self):
        vi = VarIndex(random_instance(8, 1, 50, seed=0))
        row = two_matching_row((1, 2, 3), (1, 2, 3), ((1, 4), (2, 5), (3, 6)), vi)
        assert row.sense == LE and row.rhs == 1

    def test_rhs_follows_degree_sum(self):
        # summing the degree rows over H gives 2 x(E(H)) + x(delta(H)) = 2 y(H);
        # x(E') <= |H'| and halving with integer rounding yields floor(|H'| / 2)
        vi = VarIndex(random_instance(8, 1, 50, seed=0))
        H, Hp = (1, 2, 3, 4), (1, 2, 3)
        row = two_matching_row(H, Hp, ((1, 5), (2, 6), (3, 7)), vi)
        assert row.rhs == math.floor(len(Hp) / 2)
        assert len(row.cols) == 6 + 3 + 4

    @pytest.mark.parametrize("H,Hp,Ep,cond", [
        ((1, 2, 3, 4), (1, 2, 3, 4), ((1, 5), (2, 6), (3, 7), (4, 8)), "odd and at least 3"),
        ((1, 2, 3), (1, 2, 3), ((1, 4), (2, 4), (3, 6)), "shares an endpoint"),
        ((1, 2, 3, 4), (1, 2, 3), ((1, 4), (2, 6), (3, 7)), "both endpoints in H"),
        ((1, 2, 3), (1, 2, 3), ((1, 4), (2, 5)), "exactly one"),
    ])
    def test_precondition_message(self, H, Hp, Ep, cond):
        vi = VarIndex(random_instance(8, 1, 50, seed=0))
        with pytest.raises(ModelError, match=cond):
            two_matching_row(H, Hp, Ep, vi)


class TestRow:
    def test_duplicate_columns_rejected(self):
        with pytest.raises(ModelError):
            Row((1, 1), (1.0, 2.0), LE, 0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ModelError):
            Row((1,), (np.inf,), GE, 0)

    def test_key_is_order_free(self):
        a = Row((1, 2), (1.0, 2.0), LE, 3.0)
        b = Row((2, 1), (2.0, 1.0), LE, 3.0)
        assert a.key() == b.key()

    def test_families(self):
        assert FAMILIES[-1] == "2MC" and len(FAMILIES) == 7
