"""Time the numba tree kernels against the pure-numpy fallback.

Runs both paths on the same data in one process (the kernel module exports
both), checks that they agree bit for bit, then times a full surrogate
retrain in a child process with DIRECTIVE_DSE_DISABLE_NUMBA set and unset.

    python3 benchmarks/bench_kernels.py [--rows 170] [--repeat 5]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from directive_dse import _kernels
from directive_dse.design_space import encode_many, random_point
from directive_dse.evaluator import evaluate_synthetic, EvaluatorSpec, fixture_specs
from directive_dse.pareto import weighted_resource


def dataset(n_rows, seed=0):
    specs = fixture_specs("S2")
    rng = np.random.default_rng(seed)
    pts = [random_point(specs, rng) for _ in range(n_rows)]
    X = encode_many(pts, specs)
    spec = EvaluatorSpec("synthetic", fixture_id="S2")
    recs = [evaluate_synthetic(spec, p) for p in pts]
    y = np.array([r.latency if r.ok else 0.0 for r in recs])
    return X, y, recs


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_bench(X, y, repeat, n_trees=50):
    codes, bin_values, n_bins = _kernels.bin_features(X)
    n, nf = X.shape
    n_sub = int(np.ceil(np.sqrt(nf)))
    draws = []
    for t in range(n_trees):
        rng = np.random.default_rng([0, t])
        draws.append((rng.integers(0, n, n), rng.random((2 * n - 1, nf))))

    def fit(builder):
        return [builder(codes, bin_values, n_bins, y, rows, keys, n_sub, 12, 1, _kernels.CRITERION_MSE)
                for rows, keys in draws]

    results = {}
    for name, builder in (("numba", _kernels.build_tree_numba), ("numpy", _kernels.build_tree_numpy)):
        if builder is None:
            continue
        fit(builder)  # warm-up / jit
        results[name] = (best_of(lambda: fit(builder), repeat), fit(builder))
    if len(results) == 2:
        same = all(all(np.array_equal(a, b) for a, b in zip(ta, tb))
                   for ta, tb in zip(results["numba"][1], results["numpy"][1]))
        print(f"trees identical across backends: {same}")
    for name, (sec, _) in results.items():
        print(f"{name:6s} fit {n_trees} trees on {n} rows: {sec * 1e3:9.2f} ms")
    if len(results) == 2:
        print(f"speed-up: {results['numpy'][0] / results['numba'][0]:.0f}x")


CHILD = """
import time, numpy as np, sys
sys.path.insert(0, {here!r})
from bench_kernels import dataset
from directive_dse import _kernels
from directive_dse.surrogate import retrain_bundle
X, y, recs = dataset({rows})
retrain_bundle(X, recs)
t = time.perf_counter()
for _ in range({repeat}):
    retrain_bundle(X, recs)
print(_kernels.backend(), (time.perf_counter() - t) / {repeat})
"""


def bundle_bench(rows, repeat):
    here = os.path.dirname(os.path.abspath(__file__))
    for flag in ("0", "1"):
        env = dict(os.environ, DIRECTIVE_DSE_DISABLE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", CHILD.format(here=here, rows=rows, repeat=repeat)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        print(f"retrain of all six models, backend {out[0]:6s}: {float(out[1]) * 1e3:9.1f} ms")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=170)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    X, y, _ = dataset(args.rows)
    print(f"numba available: {_kernels.HAVE_NUMBA}, active backend: {_kernels.backend()}")
    kernel_bench(X, y, args.repeat)
    bundle_bench(args.rows, args.repeat)


if __name__ == "__main__":
    main()
