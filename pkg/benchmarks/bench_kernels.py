"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Also solves a few generated instances end to end with each backend, each in
a fresh interpreter since the backend is chosen at import.
"""
import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from pdstsp import _kernels_py

try:
    from pdstsp import _kernels as compiled
except ImportError:
    compiled = None


def weights(size, rng, density=0.4):
    w = np.triu(rng.random((size, size)) * (rng.random((size, size)) < density), 1)
    return w + w.T


def cases(rng):
    d = rng.random((14, 14))
    d = np.ascontiguousarray(d + d.T)
    w60, w150 = weights(60, rng), weights(150, rng)
    ei = rng.integers(0, 400, 3000).astype(np.int64)
    ej = rng.integers(0, 400, 3000).astype(np.int64)
    keep = ei != ej
    ei, ej = ei[keep], ej[keep]
    mask = rng.random(len(ei)) < 0.5
    return {
        "held_karp_table k=13": lambda m: m.held_karp_table(d),
        "stoer_wagner 60": lambda m: m.stoer_wagner(w60),
        "stoer_wagner 150": lambda m: m.stoer_wagner(w150),
        "greedy_matching 3k edges": lambda m: m.greedy_matching(ei, ej, 400),
        "bfs_components 3k edges": lambda m: m.bfs_components(400, ei, ej, mask),
    }


SOLVE = """
import json, time
from pdstsp import bnc, kernels
from pdstsp.instance import random_instance
t = time.perf_counter()
for seed in range(3):
    bnc.solve(random_instance(25, 2, 50, seed, side=1000))
print(json.dumps([kernels.BACKEND, time.perf_counter() - t]))
"""


def solve_time(pure):
    env = dict(os.environ, PDSTSP_PURE_PYTHON="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", SOLVE], env=env, capture_output=True,
                         text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--no-solve", action="store_true")
    args = ap.parse_args()

    if compiled is None:
        print("compiled extension not built; only the fallback is timed")
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in cases(rng).items():
        py = min(timeit.repeat(lambda: call(_kernels_py), number=1, repeat=args.repeat))
        if compiled is None:
            print(f"{name:28s} {py * 1e3:10.2f}")
            continue
        cy = min(timeit.repeat(lambda: call(compiled), number=1, repeat=args.repeat))
        print(f"{name:28s} {py * 1e3:10.2f} {cy * 1e3:10.2f} {py / cy:7.1f}x")

    if not args.no_solve:
        for pure in (True, False):
            backend, secs = solve_time(pure)
            print(f"solve 3 x n=25 with {backend}: {secs:.2f} s")


if __name__ == "__main__":
    main()
