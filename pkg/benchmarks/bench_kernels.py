"""Compiled vs pure-Python kernels on the same inputs.

Run: python benchmarks/bench_kernels.py [--cutoff 40] [--points 200000]
"""

import argparse
import time

import numpy as np

from sqzdistill import _fallback, analytic, gaussification, kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cutoff", type=int, default=40)
    ap.add_argument("--points", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.BACKEND != "cython":
        print("compiled extension not available; only the fallback can be timed")
        return
    import sqzdistill._kernels as compiled

    rho = analytic.subtracted_lossy(0.458, 0.7075, args.cutoff)
    table = compiled.bs_table(args.cutoff)
    povm = gaussification.acceptance_povm(gaussification.AcceptanceSpec(1.3, "thermal"), 2 * args.cutoff)
    alphas = np.random.default_rng(0).normal(size=args.points) * (1 + 0.5j)

    cases = [
        ("bs_table", lambda m: m.bs_table(args.cutoff)),
        ("gaussify_contract", lambda m: m.gaussify_contract(rho, table, povm)),
        ("husimi_batch", lambda m: m.husimi_batch(rho, alphas)),
    ]
    print(f"cutoff={args.cutoff} points={args.points} (best of {args.repeat})")
    print(f"{'kernel':<20}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, call in cases:
        tc, oc = best_of(lambda: call(compiled), args.repeat)
        tp, op = best_of(lambda: call(_fallback), args.repeat)
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{name:<20}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{diff:>14.2e}")


if __name__ == "__main__":
    main()
