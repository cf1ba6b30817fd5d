"""Acceptance criteria, one test per criterion.

Each test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary. Run ``python tests/test_acceptance.py`` for the
lines alone.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from pdstsp import bnc, separation
from pdstsp.cli import main as cli_main
from pdstsp.heuristics import upper_bound
from pdstsp.instance import random_instance
from pdstsp.model import (
    SEC_PAIRS,
    VarIndex,
    sec_row,
    two_matching_row,
)
from pdstsp.oracle import solve_exact
from pdstsp.separation import (
    VIOLATION_TOL,
    SupportGraph,
    build_support,
    min_cut,
    separate_two_matching,
    sec_candidates,
    subtour_sets,
    two_matching_candidates,
)

sys.path.insert(0, str(Path(__file__).parent))
import reference  # noqa: E402

try:
    from conftest import ACCEPTANCE_LINES
except ImportError:  # run as a script without pytest
    ACCEPTANCE_LINES = []

# tolerances pinned from the acceptance criteria
REL_EXACT = 1e-9
SEP_TOL = 1e-6
MIP_GAP = 1e-6
SCALING_FACTOR = 3.0
ORACLE_BUDGET_S = 300.0
BENCH_BUDGET_S = 600.0


def report(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] C{number} {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def oracle_instances():
    """Instances with n in [4, 10], m in {1, 2, 3}, el in {0, 50, 100}."""
    out = []
    for seed in range(216):
        n = 4 + seed % 7
        m = 1 + (seed // 7) % 3
        el = (0, 50, 100)[(seed // 21) % 3]
        side = 100 if seed % 2 else 1000
        out.append(random_instance(n, m, el, seed, side=side))
    return out


# -- shared enumeration helpers -------------------------------------------------

def xy_width(vi):
    return vi.z_start


def dense_rows(rows, width):
    """Rows over x and y columns as a dense matrix; returns (A, rhs, sense)."""
    A = np.zeros((len(rows), width), dtype=np.float32)
    rhs = np.zeros(len(rows))
    sign = np.zeros(len(rows))
    for k, row in enumerate(rows):
        assert max(row.cols) < width, "cut touches z or t_max columns"
        A[k, list(row.cols)] = row.vals
        rhs[k] = row.rhs
        sign[k] = 1.0 if row.sense == "<=" else -1.0
    return A, rhs, sign


def max_violation(A, rhs, sign, points, chunk=4096):
    """Largest violation of any row over any point (<= 0 when all hold)."""
    worst = -np.inf
    for s in range(0, len(points), chunk):
        act = points[s:s + chunk].astype(np.float32) @ A.T
        viol = (act - rhs[None, :]) * sign[None, :]
        worst = max(worst, float(viol.max()))
    return worst


def all_sec_rows(vi):
    n = vi.instance.n
    truck = set(vi.instance.truck_only)
    rows = []
    for size in range(3, n + 1):
        for S in itertools.combinations(range(1, n + 1), size):
            for k in S:
                rows.append(("SEC-cut", S, k, sec_row("SEC-cut", S, vi, k)))
                rows.append(("SEC-in", S, k, sec_row("SEC-in", S, vi, k)))
            rows.append(("SEC-in-sum", S, None, sec_row("SEC-in-sum", S, vi)))
            rows.append(("SEC-cut-sum", S, None, sec_row("SEC-cut-sum", S, vi)))
            if truck & set(S):
                rows.append(("SEC-cut-Vt", S, None, sec_row("SEC-cut-Vt", S, vi)))
                rows.append(("SEC-in-Vt", S, None, sec_row("SEC-in-Vt", S, vi)))
    return rows


def all_two_matching_rows(vi, max_h=5):
    n = vi.instance.n
    return [two_matching_row(H, Hp, Ep, vi) for H, Hp, Ep in reference.admissible_supports(n, max_h)]


class Recorder:
    """Wraps the separators bnc calls, keeping every emitted candidate with
    the LP point it was separated from."""

    def __init__(self):
        self.records = []

    def __enter__(self):
        self._sec = bnc.sec_candidates
        self._tm = bnc.two_matching_candidates
        self._mc = bnc.min_cut

        def sec(vi, values, sets, integral):
            out = self._sec(vi, values, sets, integral)
            self.records.extend((vi, np.array(values), c) for c in out)
            return out

        def tm(vi, values, g=None):
            out = self._tm(vi, values, g)
            self.records.extend((vi, np.array(values), c) for c in out)
            return out

        self.support_graphs = []

        def mc(g):
            self.support_graphs.append(g)
            return self._mc(g)

        bnc.sec_candidates, bnc.two_matching_candidates, bnc.min_cut = sec, tm, mc
        return self

    def __exit__(self, *exc):
        bnc.sec_candidates, bnc.two_matching_candidates, bnc.min_cut = self._sec, self._tm, self._mc


# -- criteria ---------------------------------------------------------------------

def test_c01_oracle_equivalence():
    start = time.perf_counter()
    worst = 0.0
    bad = []
    insts = oracle_instances()
    for inst in insts:
        opt = solve_exact(inst).makespan
        res = bnc.solve(inst)
        diff = abs(res.objective - opt) / max(abs(opt), 1e-12) if opt else abs(res.objective)
        worst = max(worst, diff)
        if diff > REL_EXACT or res.status != bnc.OPTIMAL:
            bad.append(inst.name)
    elapsed = time.perf_counter() - start
    ok = not bad and len(insts) >= 200 and elapsed <= ORACLE_BUDGET_S
    report(1, "oracle equivalence", ok,
           f"{len(insts)} instances, {len(bad)} mismatches, max rel diff {worst:.1e}, {elapsed:.1f}s")


def test_c02_tsp_degeneration():
    bad = 0
    count = 0
    for seed in range(56):
        n = 5 + seed % 8
        inst = random_instance(n, 1 + seed % 3, 0, 1000 + seed, side=(100, 1000)[seed % 2])
        hk = reference.held_karp_pure(inst.truck_time.tolist())
        res = bnc.solve(inst)
        count += 1
        if abs(res.objective - hk) > REL_EXACT * max(1.0, hk):
            bad += 1
    report(2, "TSP degeneration", bad == 0 and count >= 50,
           f"{count} el=0 instances with n<=12, {bad} differ from Held-Karp")


def _validity_instances():
    return [random_instance(n, m, el, seed) for n, m, el, seed in
            [(6, 1, 50, 1), (6, 2, 100, 2), (7, 1, 50, 3), (7, 2, 30, 4), (7, 3, 100, 5)]]


def _emitted_rows(inst, rng):
    """Rows the separators produce on this instance: solver runs plus
    separation on subtour points and random fractional points."""
    vi = VarIndex(inst)
    rows = []
    with Recorder() as rec:
        bnc.solve(inst, use_heuristic=False)
        bnc.solve(inst, heavy_period=1, use_heuristic=False)
    rows += [c.row for _, _, c in rec.records]
    for p in reference.subtour_xy_points(inst, rng, 200):
        v = np.zeros(vi.n_cols)
        v[: len(p)] = p
        g = build_support(vi, v)
        rows += [c.row for c in sec_candidates(vi, v, subtour_sets(g), integral=True)]
        rows += [c.row for c in sec_candidates(vi, v, subtour_sets(g), integral=False)]
    for _ in range(200):
        v = _random_fractional(vi, rng)
        g = build_support(vi, v)
        rows += [c.row for c in two_matching_candidates(vi, v, g)]
        if len(separation.find_components(g)) == 1:
            S, _ = min_cut(g)
            if len(S) >= 3:
                rows += [c.row for c in sec_candidates(vi, v, [S], integral=False)]
    return rows


def _random_fractional(vi, rng, density=0.45):
    n = vi.instance.n
    v = np.zeros(vi.n_cols)
    for c in range(vi.n_edges):
        if rng.random() < density:
            v[c] = rng.choice([0.5, 1.0, float(rng.random())])
    for j in range(n + 2):
        v[vi.y(j)] = 1.0 if j in (0, n + 1) else float(rng.choice([1.0, rng.random()]))
    return v


def test_c03_cut_validity():
    rng = np.random.default_rng(33)
    worst = -np.inf
    n_rows = 0
    n_points = 0
    families = set()
    for inst in _validity_instances():
        vi = VarIndex(inst)
        pts = reference.feasible_xy_points(inst)
        n_points += len(pts)
        sec = all_sec_rows(vi)
        families.update(f for f, *_ in sec)
        rows = [r for *_, r in sec] + all_two_matching_rows(vi) + _emitted_rows(inst, rng)
        families.add("2MC")
        n_rows += len(rows)
        A, rhs, sign = dense_rows(rows, xy_width(vi))
        worst = max(worst, max_violation(A, rhs, sign, pts))
    ok = worst <= 1e-6 and families >= {"SEC-cut", "SEC-in", "SEC-in-sum", "SEC-cut-sum", "SEC-cut-Vt", "SEC-in-Vt", "2MC"}
    report(3, "cut validity", ok,
           f"{n_rows} rows x {n_points} feasible integer points, max violation {worst:.1e}")


def test_c04_variant_equivalence():
    rng = np.random.default_rng(44)
    disagreements = 0
    checks = 0
    for inst in _validity_instances():
        vi = VarIndex(inst)
        pts = np.vstack([reference.feasible_xy_points(inst),
                         reference.subtour_xy_points(inst, rng, 400)])
        width = xy_width(vi)
        n = inst.n
        truck = set(inst.truck_only)
        for size in range(3, n + 1):
            for S in itertools.combinations(range(1, n + 1), size):
                pairs = []
                for k in S:
                    pairs.append((sec_row("SEC-cut", S, vi, k), sec_row("SEC-in", S, vi, k)))
                pairs.append((sec_row("SEC-cut-sum", S, vi), sec_row("SEC-in-sum", S, vi)))
                if truck & set(S):
                    pairs.append((sec_row("SEC-cut-Vt", S, vi), sec_row("SEC-in-Vt", S, vi)))
                for a, b in pairs:
                    va = _violations(a, pts, width) > SEP_TOL
                    vb = _violations(b, pts, width) > SEP_TOL
                    disagreements += int(np.count_nonzero(va != vb))
                    checks += len(pts)
    assert set(SEC_PAIRS) == {"integer", "fractional", "truck"}
    report(4, "variant equivalence", disagreements == 0,
           f"{checks} (pair, point) checks incl. subtour points, {disagreements} disagreements")


def _planted_comb(vi, rng):
    """Random point around an odd comb: half-valued cycle on the handle,
    unit teeth, light noise on the remaining edges."""
    n = vi.instance.n
    v = np.zeros(vi.n_cols)
    for c, (a, b) in enumerate(vi.edges):
        if a != 0 and b != n + 1 and rng.random() < 0.25:
            v[c] = 0.3 * float(rng.random())
    customers = rng.permutation(np.arange(1, n + 1)).tolist()
    size = int(rng.integers(3, min(5, n - 3) + 1))
    H, rest = customers[:size], customers[size:]
    for a, b in zip(H, H[1:] + H[:1]):
        v[vi.x(min(a, b), max(a, b))] = 0.5
    teeth = 3 if size < 5 or len(rest) < 5 else int(rng.choice([3, 5]))
    for a, b in zip(H[:teeth], rest):
        v[vi.x(min(a, b), max(a, b))] = 1.0
    v[vi.y_start: vi.y_start + n + 2] = 1.0
    return v


def _violations(row, pts, width):
    a = np.zeros(width)
    a[list(row.cols)] = row.vals
    act = pts @ a
    return act - row.rhs if row.sense == "<=" else row.rhs - act


def test_c05_separation_soundness():
    rng = np.random.default_rng(55)
    # (a) every cut bnc emits is violated at its separating point
    weakest = np.inf
    emitted = 0
    graphs = []
    with Recorder() as rec:
        for seed in range(20):
            inst = random_instance(6 + seed % 3, 1 + seed % 3, (0, 50, 100)[seed % 3], seed)
            bnc.solve(inst, heavy_period=1, use_heuristic=False)
        for seed in range(6):
            bnc.solve(random_instance(25, 2, 50, seed, side=1000))
    for vi, values, cand in rec.records:
        a = np.zeros(vi.n_cols)
        a[list(cand.row.cols)] = cand.row.vals
        act = float(values @ a)
        viol = act - cand.row.rhs if cand.row.sense == "<=" else cand.row.rhs - act
        weakest = min(weakest, viol)
        emitted += 1
    graphs = [g for g in rec.support_graphs if len(g.vertices) <= 10]
    sound = emitted > 0 and weakest > SEP_TOL

    # (b) min-cut equals the bipartition minimum on small support graphs
    for _ in range(60):
        n = int(rng.integers(3, 9))
        vi = VarIndex(random_instance(n, 1, 0, 0))
        graphs.append(build_support(vi, _random_fractional(vi, rng, density=0.6)))
    cut_bad = 0
    for g in graphs:
        _, value = min_cut(g)
        verts = g.vertices.tolist()
        pos = {v: k for k, v in enumerate(verts)}
        w = np.zeros((len(verts), len(verts)))
        for a, b, x in zip(g.ei.tolist(), g.ej.tolist(), g.weight.tolist()):
            w[pos[a], pos[b]] += x
            w[pos[b], pos[a]] += x
        best = reference.brute_min_cut(w, together=(pos[0], pos[g.n + 1]))
        cut_bad += abs(value - best) > 1e-9

    # (c) 2MC emissions are among the exhaustively enumerated violated rows
    tm_bad = 0
    tm_count = 0
    for n in (6, 7):
        vi = VarIndex(random_instance(n, 1, 0, 0))
        supports = list(reference.admissible_supports(n, 5))
        A, rhs, sign = dense_rows([two_matching_row(H, Hp, Ep, vi) for H, Hp, Ep in supports],
                                  xy_width(vi))
        keyed = {(H, Hp, tuple(sorted(Ep))): k for k, (H, Hp, Ep) in enumerate(supports)}
        for k in range(300):
            v = _planted_comb(vi, rng) if k % 2 else _random_fractional(vi, rng)
            viol = (A @ v[: xy_width(vi)].astype(np.float32) - rhs) * sign
            violated = viol > SEP_TOL
            for cand in two_matching_candidates(vi, v):
                H, Hp, Ep = cand.support
                if len(H) > 5:
                    continue
                tm_count += 1
                k = keyed.get((tuple(H), tuple(Hp), tuple(sorted(Ep))))
                tm_bad += k is None or not violated[k]
    ok = sound and cut_bad == 0 and tm_bad == 0 and tm_count > 0
    report(5, "separation soundness", ok,
           f"{emitted} bnc cuts, min violation {weakest:.2e}; {len(graphs)} min-cuts, "
           f"{cut_bad} off; {tm_count} 2MC rows, {tm_bad} outside enumeration")


def _dense_support(n, rng):
    i, j = np.triu_indices(n + 2, 1)
    keep = ~((i == 0) & (j == n + 1))
    i, j = i[keep].astype(np.int64), j[keep].astype(np.int64)
    w = rng.random(len(i)) * 0.5 + 1e-6
    y = rng.random(n + 2)
    y[0] = y[-1] = 1.0
    return SupportGraph(n, np.arange(n + 2), i, j, w, y)


def test_c06_complexity_scaling():
    rng = np.random.default_rng(66)
    sizes = (100, 200, 400, 800)
    consts = []
    for n in sizes:
        g = _dense_support(n, rng)
        times = []
        for _ in range(7):
            t0 = time.perf_counter()
            separate_two_matching(g)
            times.append(time.perf_counter() - t0)
        consts.append(min(times) / (n * n * math.log(n)))
    ratio = max(consts) / min(consts)
    report(6, "complexity scaling", ratio <= SCALING_FACTOR,
           f"c = t / (n^2 log n) spread {ratio:.2f}x over n = {sizes}")


def _trace_runs():
    runs = []
    for seed in range(24):
        n = (10, 15, 20, 25)[seed % 4]
        inst = random_instance(n, 1 + seed % 3, (25, 50, 100)[seed % 3], seed, side=1000)
        runs.append(bnc.solve(inst, use_heuristic=bool(seed % 2)))
    return runs


def test_c07_bound_sanity():
    problems = 0
    records = 0
    optimal = 0
    for res in _trace_runs():
        lbs = [r["lb"] for r in res.trace]
        ubs = [r["ub"] for r in res.trace]
        records += len(res.trace)
        problems += sum(b < a - 1e-9 * max(1.0, abs(a)) for a, b in zip(lbs, lbs[1:]))
        problems += sum(b > a for a, b in zip(ubs, ubs[1:]))
        problems += sum(lb > ub + 1e-9 * max(1.0, abs(ub)) for lb, ub in zip(lbs, ubs))
        if res.status == bnc.OPTIMAL:
            optimal += 1
            problems += not (0 <= res.gap <= MIP_GAP)
    report(7, "bound sanity", problems == 0 and records > 0,
           f"{records} trace records over 24 runs ({optimal} optimal), {problems} violations")


def test_c08_determinism():
    mismatches = 0
    runs = 0
    for seed in range(8):
        inst = random_instance(18 + 2 * seed, 1 + seed % 3, 50, seed, side=1000)
        a = bnc.solve(inst)
        b = bnc.solve(inst)
        runs += 1
        same = (a.nodes, a.cuts, a.objective) == (b.nodes, b.cuts, b.objective)
        strip = [{k: v for k, v in r.items() if k != "time"} for r in a.trace]
        strip_b = [{k: v for k, v in r.items() if k != "time"} for r in b.trace]
        mismatches += not (same and json.dumps(strip) == json.dumps(strip_b))
    report(8, "determinism", mismatches == 0,
           f"{runs} instance pairs, {mismatches} differ in nodes/cuts/objective/trace")


def test_c09_bench_shape(tmp_path):
    root = Path(tmp_path)
    start = time.perf_counter()
    entries = []
    for n, dp, sp, cd in ((20, "center", "2", "random"), (30, "corner", "1.5", "clustered")):
        out = root / f"n{n}"
        code = cli_main(["generate", "--n", str(n), "--cd", cd, "--dp", dp, "--sp", sp,
                         "--el", "20,40,60,80,100", "--m", "1,2,3", "--seed", str(n),
                         "--out-dir", str(out)])
        assert code == 0
        for e in json.loads((out / "manifest.json").read_text())["instances"]:
            entries.append(dict(e, path=f"n{n}/{e['path']}"))
    (root / "manifest.json").write_text(json.dumps({"instances": entries}))
    code = cli_main(["bench", str(root / "manifest.json"), "--csv", str(root / "bench.csv")])
    elapsed = time.perf_counter() - start
    rows = list(csv.DictReader((root / "bench.csv").open()))
    total = sum(int(r["instances"]) for r in rows)
    opt = sum(int(r["opt"]) for r in rows)
    gaps = {r["gap_pct"] for r in rows}
    ok = code == 0 and total == 30 and opt == 30 and gaps == {"0.00"} and elapsed <= BENCH_BUDGET_S
    report(9, "scaled bench shape", ok,
           f"#opt {opt}/{total}, gap {sorted(gaps)}%, {elapsed:.1f}s")


def test_c10_heuristic_soundness():
    below = 0
    changed = 0
    count = 0
    for inst in oracle_instances()[::1]:
        opt = solve_exact(inst).makespan
        heur = upper_bound(inst)
        count += 1
        below += heur.makespan < opt * (1 - REL_EXACT)
        plain = bnc.solve(inst, use_heuristic=False)
        hinted = bnc.solve(inst, use_heuristic=False, ub_hint=heur.makespan)
        if abs(hinted.objective - plain.objective) > REL_EXACT * max(1.0, plain.objective):
            changed += 1
    report(10, "heuristic soundness", below == 0 and changed == 0,
           f"{count} instances: {below} heuristic values below the optimum, "
           f"{changed} optima changed by the hint")


if __name__ == "__main__":
    import tempfile

    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn(tempfile.mkdtemp()) if name.startswith("test_c09") else fn()
            except AssertionError:
                pass
