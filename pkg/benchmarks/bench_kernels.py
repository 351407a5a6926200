"""Benchmark the Monte Carlo kernels: compiled extension vs pure Python.

Usage: python benchmarks/bench_kernels.py [--replicas N]

Both backends implement identical algorithms over identical random streams,
so the outputs are checked for equality while timing.
"""

import argparse
import time

import numpy as np

from exhier import _kernels
from exhier.weights import WeightTree

CASES = [
    ("direct dyadic n=4", "sample", ("regime", 12, 1.0, 0.0, 0.0), 4),
    ("direct triple n=4", "sample", ("regime", 40, 1 / 3, 1 / 3, 1 / 3), 4),
    ("direct comb n=6", "sample", ("regime", 0, 0.0, 0.0, 1.0), 6),
    ("direct weight-tree n=4", "sample", None, 4),  # params filled below
    ("reconstruct dyadic n=4", "reconstruct", ("regime", 12, 1.0, 0.0, 0.0), 4),
    ("reconstruct triple n=4", "reconstruct", ("regime", 40, 1 / 3, 1 / 3, 1 / 3), 4),
    ("reconstruct comb n=4", "reconstruct", ("regime", 0, 0.0, 0.0, 1.0), 4),
]


def run(impl, kind, params, n, replicas, seed=12345):
    t0 = time.perf_counter()
    if kind == "sample":
        out = impl.sample_fingerprints(params, n, replicas, seed)
    else:
        out = impl.reconstruct_fingerprints(params, n, replicas, seed, 16, 1 << 21)
    return time.perf_counter() - t0, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--replicas", type=int, default=20_000)
    args = ap.parse_args()

    impls = _kernels.implementations()
    print(f"active backend: {_kernels.BACKEND}; replicas per case: {args.replicas}")
    if "cython" not in impls:
        print("compiled extension unavailable; timing the pure backend only")
    header = f"{'case':28s} " + "".join(f"{name:>12s}" for name in impls) + "   speedup"
    print(header)
    print("-" * len(header))
    wtree_params = _kernels.wtree_params(WeightTree.dyadic(10))
    for label, kind, params, n in CASES:
        params = params or wtree_params
        if kind == "reconstruct" and params[0] != "regime":
            continue
        times = {}
        outputs = {}
        for name, impl in impls.items():
            reps = args.replicas if name != "python" or kind == "sample" \
                else max(args.replicas // 10, 1000)
            dt, out = run(impl, kind, params, n, reps)
            times[name] = dt / reps
            outputs[name] = out[:min(len(out), 1000)]
        if len(outputs) == 2:
            a, b = outputs.values()
            m = min(len(a), len(b))
            assert np.array_equal(a[:m], b[:m]), f"backend mismatch in {label}"
        row = f"{label:28s} "
        row += "".join(f"{times[name] * 1e6:10.2f}us" for name in impls)
        if len(times) == 2:
            row += f"   x{times['python'] / times['cython']:.0f}"
        print(row)


if __name__ == "__main__":
    main()
