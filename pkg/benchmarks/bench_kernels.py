#!/usr/bin/env python3
"""Time the water-fill kernels: compiled extension vs pure-Python twin.

Run from the repository root after installing the package:

    python3 benchmarks/bench_kernels.py

Prints one row per alphabet size with calls/second for each backend and the
speedup. The twins are checked to agree bitwise on a sample of instances
before timing starts.
"""

import argparse
import time

import numpy as np

from tvdp import _kernels_py

try:
    from tvdp import _kernels as compiled
except ImportError:
    compiled = None


def make_instances(rng, size, count):
    out = []
    for _ in range(count):
        mu = rng.dirichlet(np.ones(size))
        levels = rng.uniform(-10.0, 10.0, size)
        radius = rng.uniform(0.0, 2.0)
        out.append((mu, levels, radius))
    return out


def time_backend(fn, instances, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for mu, levels, radius in instances:
            fn(mu, levels, radius, 1e-9)
        best = min(best, time.perf_counter() - t0)
    return len(instances) / best


def main():
    ap = argparse.ArgumentParser(
        description="water-fill kernel benchmark: compiled vs pure Python"
    )
    ap.add_argument("--count", type=int, default=2000, help="instances per size")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing repeats per backend, best kept")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if compiled is None:
        print("compiled extension not importable; timing the python twin only")

    rng = np.random.default_rng(args.seed)
    header = f"{'size':>6} {'python calls/s':>16} {'compiled calls/s':>18} {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for size in (2, 4, 8, 16, 64, 256):
        instances = make_instances(rng, size, args.count)
        if compiled is not None:
            for mu, levels, radius in instances[:200]:
                a = _kernels_py.waterfill(mu, levels, radius, 1e-9)
                b = compiled.waterfill(mu, levels, radius, 1e-9)
                assert np.array_equal(a[0], b[0]) and a[1:] == b[1:], "backend mismatch"
        py = time_backend(_kernels_py.waterfill, instances, args.repeats)
        if compiled is None:
            print(f"{size:>6} {py:>16.0f} {'-':>18} {'-':>9}")
        else:
            cc = time_backend(compiled.waterfill, instances, args.repeats)
            print(f"{size:>6} {py:>16.0f} {cc:>18.0f} {cc / py:>8.1f}x")


if __name__ == "__main__":
    main()
