"""Time the numba kernels against the pure-numpy fallbacks on one workload.

Each backend runs in a fresh subprocess with FLINNG_BACKEND set, because the
backend is chosen at import time. The workload builds a planted-neighbor
index and answers top-10 queries; the two backends must return identical
results, so only the timings differ.

Usage: python benchmarks/compare_backends.py [--n 20000] [--queries 200]
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from flinng import dataio
from flinng._kernels import BACKEND
from flinng.index import FlinngConfig, FlinngIndex, QueryScratch
from flinng.lsh import HashFamilySpec

n, n_queries = json.loads(sys.argv[1])
points, queries, truth = dataio.generate_synthetic(
    dataio.SyntheticSpec(
        n_points=n, universe=4 * n * 100, tokens_per_point=100,
        n_queries=n_queries, s_high=0.8, seed=7,
    )
)
spec = HashFamilySpec("minhash", m=32, l_bits=16, seed=0)
config = FlinngConfig(num_cells=256, repetitions=3, hash_spec=spec, metric="jaccard")

# warm compile on a tiny build so timings measure the algorithm
tiny = FlinngIndex.build(points[:4], FlinngConfig(2, 2, spec, "jaccard"))
tiny.query_topk(points[0], 1)

start = time.perf_counter()
index = FlinngIndex.build(points, config)
build_s = time.perf_counter() - start

scratch = QueryScratch(index)
index.query_topk(queries[0], 10, scratch)
lat = []
results = []
for q in queries:
    t0 = time.perf_counter_ns()
    ids = index.query_topk(q, 10, scratch)
    lat.append(time.perf_counter_ns() - t0)
    results.append(ids.tolist())
print(json.dumps({
    "backend": BACKEND,
    "build_s": build_s,
    "p50_us": float(np.percentile(lat, 50)) / 1e3,
    "p95_us": float(np.percentile(lat, 95)) / 1e3,
    "results_digest": hash(tuple(tuple(r) for r in results)) & 0xFFFFFFFF,
}))
"""


def run_backend(backend, n, n_queries):
    env = dict(os.environ, FLINNG_BACKEND=backend)
    out = subprocess.run(
        [sys.executable, "-c", WORKLOAD, json.dumps([n, n_queries])],
        env=env, capture_output=True, text=True, check=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20_000, help="dataset size")
    parser.add_argument("--queries", type=int, default=200)
    args = parser.parse_args()

    rows = []
    for backend in ("numba", "numpy"):
        try:
            rows.append(run_backend(backend, args.n, args.queries))
        except subprocess.CalledProcessError as exc:
            print(f"{backend} run failed:\n{exc.stderr}", file=sys.stderr)
            raise SystemExit(1)

    digests = {r["results_digest"] for r in rows}
    print(f"{'backend':<8} {'build_s':>9} {'p50_us':>9} {'p95_us':>9}")
    for r in rows:
        print(f"{r['backend']:<8} {r['build_s']:>9.3f} {r['p50_us']:>9.1f} {r['p95_us']:>9.1f}")
    if len(digests) == 1:
        print("results: identical across backends")
    else:
        print("results: MISMATCH across backends", file=sys.stderr)
        raise SystemExit(1)
    numba_row = next((r for r in rows if r["backend"] == "numba"), None)
    numpy_row = next((r for r in rows if r["backend"] == "numpy"), None)
    if numba_row and numpy_row:
        print(
            f"speedup: build x{numpy_row['build_s'] / numba_row['build_s']:.1f}, "
            f"query p50 x{numpy_row['p50_us'] / numba_row['p50_us']:.1f}"
        )


if __name__ == "__main__":
    main()
