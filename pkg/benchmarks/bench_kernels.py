"""Time the compiled kernels against the numpy fallback.

Each backend runs in its own interpreter because the backend is chosen at
import time.  Usage: python benchmarks/bench_kernels.py [--n 4096] [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from shortcutlab import _kernels as K
from shortcutlab.instances import grid, random_graph

n, repeat = int(sys.argv[1]), int(sys.argv[2])
side = int(n ** 0.5)
g = grid(side)
r = random_graph(n // 4, 8.0 / (n // 4), 0)
w = np.random.default_rng(0).integers(1, 50, g.m)[g.eid]
masks = np.random.default_rng(1).random((64, r.m)) < 0.8


def bench(fn):
    fn()  # warm up (triggers compilation on the numba backend)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


out = {
    "backend": K.BACKEND,
    "bfs": bench(lambda: K.bfs(g.indptr, g.indices, [0], parents=True)),
    "dijkstra": bench(lambda: K.dijkstra(g.indptr, g.indices, w, [0], parents=True)),
    "eccentricities": bench(lambda: K.eccentricities(g.indptr, g.indices, range(32))),
    "connectivity_batch": bench(lambda: K.connectivity_batch(r.n, r.edges[:0], r.edges, masks)),
}
json.dump(out, sys.stdout)
"""


def measure(backend, n, repeat):
    env = dict(os.environ, SHORTCUTLAB_KERNELS=backend)
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(n), str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=4096)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    fast, slow = measure("numba", args.n, args.repeat), measure("numpy", args.n, args.repeat)
    print(f"{'kernel':<20}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}")
    for name in ("bfs", "dijkstra", "eccentricities", "connectivity_batch"):
        a, b = fast[name] * 1e3, slow[name] * 1e3
        print(f"{name:<20}{a:>12.2f}{b:>12.2f}{b / a:>10.1f}")


if __name__ == "__main__":
    main()
