"""Command-line interface: ``pdstsp {solve,generate,bench,check}``."""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from . import bnc
from .instance import (
    GeneratorConfig,
    Instance,
    InstanceError,
    Solution,
    SolutionError,
    generate,
    solution_violations,
)

log = logging.getLogger("pdstsp")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIME_LIMIT = 2
EXIT_INFEASIBLE = 3

CSV_HEADER = ["class", "n", "instances", "opt", "imp", "gap_pct", "time_s"]


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _strs(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _finite(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=1, default=_json_default) + "\n")


def load_instance(path, args=None) -> Instance:
    """Read an instance JSON file, or a TSPLIB file combined with the
    generator flags on ``args``."""
    path = Path(path)
    text = path.read_text()
    if text.lstrip().startswith("{"):
        return Instance.from_json(text)
    cfg = GeneratorConfig(
        tsplib=str(path),
        dp=getattr(args, "dp", "center") or "center",
        el=float(getattr(args, "el", 50.0)),
        sp=float(getattr(args, "sp", 2.0)),
        m=int(getattr(args, "m", 1)),
        seed=int(getattr(args, "seed", 0)),
    )
    return generate(cfg)


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def cmd_solve(args) -> int:
    try:
        inst = load_instance(args.instance, args)
    except (OSError, InstanceError, ValueError) as exc:
        print(f"error: cannot read instance {args.instance}: {exc}", file=sys.stderr)
        return EXIT_ERROR
    ub_solution = None
    if args.ub_solution:
        try:
            ub_solution = Solution.from_json(Path(args.ub_solution).read_text())
        except (OSError, SolutionError) as exc:
            print(f"error: cannot read UB solution: {exc}", file=sys.stderr)
            return EXIT_ERROR
    if args.threads > 1:
        log.warning("tree search is single-threaded; --threads %d ignored", args.threads)
    params = bnc.Params(
        time_limit=args.time_limit,
        mip_gap=args.mip_gap,
        node_limit=args.node_limit,
        ub_hint=args.ub_hint,
        ub_solution=ub_solution,
        use_heuristic=not args.no_heuristic_ub,
    )
    try:
        solver = bnc.BranchAndCut(inst, params)
        result = solver.solve()
    except SolutionError as exc:
        print(f"error: invalid UB solution: {exc}", file=sys.stderr)
        return EXIT_ERROR
    stem = Path(args.instance).name.split(".")[0]
    out_dir = Path(args.out_dir) if args.out_dir else Path(args.instance).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    sol_path = Path(args.solution) if args.solution else out_dir / f"{stem}.sol.json"
    stats_path = Path(args.stats) if args.stats else out_dir / f"{stem}.stats.json"
    if result.solution is not None:
        sol_path.write_text(result.solution.to_json())
    stats = {k: _finite(v) for k, v in result.stats().items()}
    stats["solution"] = str(sol_path) if result.solution is not None else None
    _write_json(stats_path, stats)
    if args.write_lp:
        solver.lp.write(args.write_lp)
    if args.log:
        with open(args.log, "w") as fh:
            for rec in result.trace:
                fh.write(json.dumps(rec, sort_keys=True, default=_json_default) + "\n")
    gap = "-" if not math.isfinite(result.gap) else f"{100 * result.gap:.2f}%"
    print(f"{result.status} objective={result.objective} bound={result.bound} gap={gap} "
          f"nodes={result.nodes} time={result.time:.2f}s")
    if result.status in (bnc.OPTIMAL, bnc.FEASIBLE):
        return EXIT_OK
    if result.status == bnc.TIME_LIMIT:
        return EXIT_TIME_LIMIT
    return EXIT_INFEASIBLE


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

GRID_KEYS = ("dp", "el", "sp", "m")


def _grid_from_args(args) -> dict:
    grid = {"dp": ["center"], "el": [50.0], "sp": [2.0], "m": [1]}
    base = {"seed": 0, "n": None, "cd": "random", "tsplib": None}
    if args.config:
        doc = json.loads(Path(args.config).read_text())
        for k in GRID_KEYS:
            if k in doc:
                v = doc[k]
                grid[k] = v if isinstance(v, list) else [v]
        for k in base:
            if k in doc:
                base[k] = doc[k]
    if args.dp:
        grid["dp"] = _strs(args.dp)
    if args.el:
        grid["el"] = _floats(args.el)
    if args.sp:
        grid["sp"] = _floats(args.sp)
    if args.m:
        grid["m"] = _ints(args.m)
    for k in ("seed", "n", "cd", "tsplib"):
        v = getattr(args, k, None)
        if v is not None:
            base[k] = v
    return {"grid": grid, "base": base}


def cmd_generate(args) -> int:
    try:
        plan = _grid_from_args(args)
    except (OSError, ValueError) as exc:
        print(f"error: bad generator configuration: {exc}", file=sys.stderr)
        return EXIT_ERROR
    grid, base = plan["grid"], plan["base"]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for dp, el, sp, m in itertools.product(*(grid[k] for k in GRID_KEYS)):
        try:
            cfg = GeneratorConfig(dp=dp, el=float(el), sp=float(sp), m=int(m), **base)
            inst = generate(cfg)
        except (InstanceError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        fname = f"{cfg.label}.json"
        inst.save(out / fname)
        cls = Path(base["tsplib"]).stem if base["tsplib"] else f"{base['cd']}{inst.n}"
        entries.append({"path": fname, "class": cls, "n": inst.n, "name": inst.name})
    _write_json(out / "manifest.json", {"instances": entries})
    print(f"wrote {len(entries)} instances to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench
# ---------------------------------------------------------------------------

@dataclass
class BenchRow:
    name: str
    n: int
    instances: int = 0
    opt: int = 0
    imp: int = 0
    gap_sum: float = 0.0
    time_sum: float = 0.0
    errors: int = 0

    @property
    def gap_pct(self) -> float:
        solved = self.instances - self.errors
        return 100.0 * self.gap_sum / solved if solved else 0.0

    @property
    def time_s(self) -> float:
        solved = self.instances - self.errors
        return self.time_sum / solved if solved else 0.0

    def cells(self) -> list[str]:
        return [self.name, str(self.n), str(self.instances), str(self.opt), str(self.imp),
                f"{self.gap_pct:.2f}", f"{self.time_s:.2f}"]


def _bench_one(job):
    path, hint, time_limit, mip_gap = job
    try:
        inst = Instance.load(path)
    except (OSError, InstanceError) as exc:
        return {"error": str(exc)}
    res = bnc.solve(inst, bnc.Params(time_limit=time_limit, mip_gap=mip_gap))
    gap = res.gap if math.isfinite(res.gap) else 1.0
    return {
        "n": inst.n,
        "status": res.status,
        "objective": res.objective,
        "gap": gap,
        "time": res.time,
        "improved": hint is not None and res.objective < hint - 1e-9 * max(1.0, abs(hint)),
    }


def _hint_of(entry: dict, root: Path):
    if entry.get("ub_hint") is not None:
        return float(entry["ub_hint"])
    if entry.get("ub_hint_file"):
        sol = Solution.from_json((root / entry["ub_hint_file"]).read_text())
        return float(sol.makespan)
    return None


def bench_rows(manifest_path, time_limit: float, mip_gap: float = 1e-6,
               jobs: int = 1) -> list[BenchRow]:
    manifest_path = Path(manifest_path)
    root = manifest_path.parent
    doc = json.loads(manifest_path.read_text())
    entries = doc.get("instances", [])
    work = []
    for e in entries:
        try:
            hint = _hint_of(e, root)
        except (OSError, SolutionError):
            hint = None
        work.append((str(root / e["path"]), hint, time_limit, mip_gap))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_bench_one, work))
    else:
        results = [_bench_one(w) for w in work]
    rows: dict[tuple[str, int], BenchRow] = {}
    for e, r in zip(entries, results):
        n = int(e.get("n", r.get("n", 0)))
        key = (e.get("class", ""), n)
        row = rows.setdefault(key, BenchRow(key[0], n))
        row.instances += 1
        if "error" in r:
            row.errors += 1
            log.error("%s: %s", e["path"], r["error"])
            continue
        row.opt += r["status"] == bnc.OPTIMAL
        row.imp += bool(r["improved"])
        row.gap_sum += r["gap"]
        row.time_sum += r["time"]
    return [rows[k] for k in sorted(rows, key=lambda k: (k[1], k[0]))]


def render_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def render_markdown(rows: list[BenchRow]) -> str:
    head = ["Class", "n", "# Ins", "# Opt", "# Imp", "gap (%)", "time (s)"]
    with_errors = any(r.errors for r in rows)
    if with_errors:
        head.append("errors")
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for r in rows:
        cells = r.cells() + ([str(r.errors)] if with_errors else [])
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def cmd_bench(args) -> int:
    try:
        rows = bench_rows(args.manifest, args.time_limit, args.mip_gap, args.jobs)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot run bench: {exc}", file=sys.stderr)
        return EXIT_ERROR
    text_csv = render_csv(rows)
    text_md = render_markdown(rows)
    if args.csv:
        Path(args.csv).write_text(text_csv)
    if args.markdown:
        Path(args.markdown).write_text(text_md)
    sys.stdout.write(text_md)
    return EXIT_ERROR if any(r.errors for r in rows) else EXIT_OK


# ---------------------------------------------------------------------------
# check
# ---------------------------------------------------------------------------

def cmd_check(args) -> int:
    try:
        inst = load_instance(args.instance, args)
        sol = Solution.from_json(Path(args.solution).read_text())
    except (OSError, InstanceError, SolutionError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    problems = [str(p) for p in solution_violations(inst, sol)]
    if not problems and math.isfinite(sol.makespan):
        actual = sol.with_makespan(inst).makespan
        if abs(actual - sol.makespan) > 1e-6 * max(1.0, abs(actual)):
            problems.append(f"stored makespan {sol.makespan} differs from recomputed {actual}")
    if problems:
        for p in problems:
            print(f"violation: {p}")
        return EXIT_ERROR
    print(f"ok makespan={sol.with_makespan(inst).makespan}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdstsp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def generator_flags(p, grid: bool):
        p.add_argument("--dp", default=None if grid else "center",
                       help="depot placement: center or corner" + (" (comma list)" if grid else ""))
        p.add_argument("--el", default=None if grid else 50.0,
                       help="percentage of drone-eligible customers")
        p.add_argument("--sp", default=None if grid else 2.0, help="drone speed / truck speed")
        p.add_argument("--m", default=None if grid else 1, help="number of drones")
        p.add_argument("--seed", type=int, default=None if grid else 0)

    p = sub.add_parser("solve", help="solve one instance")
    p.add_argument("instance", help="instance JSON, or a TSPLIB file used with the generator flags")
    p.add_argument("--time-limit", type=float, default=10800.0)
    p.add_argument("--mip-gap", type=float, default=1e-6)
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--no-heuristic-ub", action="store_true")
    p.add_argument("--ub-hint", type=float, default=None)
    p.add_argument("--ub-solution", default=None, help="solution JSON installed as incumbent")
    p.add_argument("--log", default=None, help="write the node trace as JSON lines")
    p.add_argument("--write-lp", default=None, help="dump the final relaxation in LP text format")
    p.add_argument("--out-dir", default=None)
    p.add_argument("--solution", default=None, help="solution output path")
    p.add_argument("--stats", default=None, help="stats output path")
    generator_flags(p, grid=False)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("generate", help="generate an instance grid")
    p.add_argument("--config", default=None, help="JSON file with grid and source keys")
    p.add_argument("--tsplib", default=None, help="TSPLIB seed file")
    p.add_argument("--n", type=int, default=None, help="customers for synthetic layouts")
    p.add_argument("--cd", default=None, choices=["random", "clustered", "random-clustered"])
    p.add_argument("--out-dir", required=True)
    generator_flags(p, grid=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="solve a manifest and print a summary table")
    p.add_argument("manifest")
    p.add_argument("--time-limit", type=float, default=10800.0)
    p.add_argument("--mip-gap", type=float, default=1e-6)
    p.add_argument("--jobs", "--threads", type=int, default=1, dest="jobs",
                   help="instances solved in parallel worker processes")
    p.add_argument("--csv", default=None)
    p.add_argument("--markdown", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="validate a solution file")
    p.add_argument("instance")
    p.add_argument("solution")
    generator_flags(p, grid=False)
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
