#!/usr/bin/env python3
"""Time the bidiagonal QR kernel: compiled extension vs pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--sizes 32,64,128] [--repeat 3]
"""
import argparse
import time

import numpy as np

from rankfeat import linalg


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--sizes", default="32,64,128")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if linalg.BACKEND != "compiled":
        raise SystemExit("compiled extension not built; run pip install -e . first")
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>6} {'compiled_s':>12} {'python_s':>12} {'speedup':>8} {'max|dS|':>10}")
    for n in (int(v) for v in args.sizes.split(",")):
        x = rng.standard_normal((n, n))
        tc = best_of(lambda: linalg.svd(x, backend="compiled"), args.repeat)
        tp = best_of(lambda: linalg.svd(x, backend="python"), args.repeat)
        ds = np.abs(linalg.singular_values(x, "compiled") - linalg.singular_values(x, "python")).max()
        print(f"{n:>6} {tc:>12.4f} {tp:>12.4f} {tp / tc:>8.1f} {ds:>10.2e}")


if __name__ == "__main__":
    main()
