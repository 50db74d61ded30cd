#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure NumPy fallback.

Covers the two sequential hot loops: the lag-1 telemetry recurrence and the
backward random-walk sampler. Both backends consume identical inputs, so
the outputs are checked for exact agreement while timing.

Usage: python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from causemine._kernels import BACKEND, available_backends


def time_call(fn, *args, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - start)
    return best, result


def bench_var1(backends, repeat):
    print("\nlag-1 recurrence (horizon x nodes)")
    print(f"{'size':<16}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    rng = np.random.default_rng(0)
    for horizon, nodes in ((2_000, 14), (20_000, 14), (40_000, 14), (20_000, 50)):
        coef = rng.normal(0, 0.5 / np.sqrt(nodes), (nodes, nodes))  # stable radius
        inov = rng.normal(0, 1, (horizon, nodes))
        times, outputs = {}, {}
        for name, module in backends.items():
            times[name], outputs[name] = time_call(
                module.var1_recurrence, coef, inov, repeat=repeat
            )
        if len(outputs) == 2:
            assert np.array_equal(*outputs.values()), "backend outputs differ"
        row = f"{f'{horizon}x{nodes}':<16}" + "".join(
            f"{times[name] * 1e3:>12.2f}ms" for name in backends
        )
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


def bench_walks(backends, repeat):
    print("\nbackward random walks (walks x steps, 40-node layered dag)")
    print(f"{'size':<16}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")
    rng = np.random.default_rng(1)
    n = 40
    indptr = [0]
    parents, cums = [], []
    for v in range(n):
        pool = list(range(max(0, v - 4), v))
        running = 0.0
        for p in pool:
            running += float(rng.uniform(0.2, 1.0))
            parents.append(p)
            cums.append(running)
        indptr.append(len(parents))
    indptr = np.array(indptr, dtype=np.int64)
    parents = np.array(parents, dtype=np.int64)
    cums = np.array(cums)
    for walks, steps in ((1_000, 10), (10_000, 10), (100_000, 10), (10_000, 50)):
        uniforms = rng.random((walks, steps, 2))
        times, outputs = {}, {}
        for name, module in backends.items():
            times[name], outputs[name] = time_call(
                module.run_walks, indptr, parents, cums, n - 1, 0.15, steps, uniforms,
                repeat=repeat,
            )
        if len(outputs) == 2:
            assert np.array_equal(*outputs.values()), "backend outputs differ"
        row = f"{f'{walks}x{steps}':<16}" + "".join(
            f"{times[name] * 1e3:>12.2f}ms" for name in backends
        )
        if "cython" in times:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    backends = available_backends()
    print(f"active backend: {BACKEND}; available: {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled extension not built; timing the fallback only "
              "(build with `pip install -e . --no-build-isolation`)")
    bench_var1(backends, args.repeat)
    bench_walks(backends, args.repeat)


if __name__ == "__main__":
    main()
