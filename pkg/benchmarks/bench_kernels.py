"""Compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--reps N] [--K K ...]

Prints one line per (kernel, K) with the best-of-N time for each backend and
the speedup. Both backends are checked to agree before timing.
"""
import argparse
import timeit

import numpy as np

from pmerge import kernels
from pmerge.calibrators import CalibratorSpec


def cases(K, n, rng):
    P = rng.random((n, K)) ** 2
    U = rng.random(n)
    gh = CalibratorSpec.grid_harmonic(K).kernel_args()
    hm = CalibratorSpec.harmonic(K).kernel_args()
    x = rng.random(n * K) * 1.2
    return {
        "calibrate harmonic": lambda m: m.calibrate(hm[0], False, x, *hm[1:]),
        "bisect prefix_max grid_harmonic": lambda m: m.bisect_rows(
            P, U, gh[0], False, kernels.PREFIX_MAX, *gh[1:], 50),
        "bisect batch_threshold harmonic": lambda m: m.bisect_rows(
            P, U, hm[0], False, kernels.BATCH_THRESHOLD, *hm[1:], 50),
        "ex_quantile_min": lambda m: m.ex_quantile_min(P, max(1, K // 2), K),
        "ex_tight arithmetic": lambda m: m.ex_tight(P, kernels.TIGHT_ARITHMETIC, 0.0),
        "ex_tight geometric": lambda m: m.ex_tight(P, kernels.TIGHT_GEOMETRIC, 0.0),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--rows", type=int, default=2000)
    ap.add_argument("--K", type=int, nargs="+", default=[5, 20, 100])
    args = ap.parse_args()

    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the numpy fallback is available")
    print(f"{'kernel':34s} {'K':>4s} " + " ".join(f"{b:>10s}" for b in backends) + "  speedup")
    rng = np.random.default_rng(0)
    for K in args.K:
        for name, fn in cases(K, args.rows, rng).items():
            outs = {b: fn(m) for b, m in backends.items()}
            ref = outs["python"]
            for b, o in outs.items():
                assert np.allclose(o, ref, rtol=1e-15, atol=0), (name, b)
            t = {b: min(timeit.repeat(lambda m=m: fn(m), number=1, repeat=args.reps))
                 for b, m in backends.items()}
            speed = t["python"] / t["cython"] if "cython" in t else float("nan")
            print(f"{name:34s} {K:4d} " + " ".join(f"{v * 1e3:8.2f}ms" for v in t.values())
                  + f"  {speed:6.1f}x")


if __name__ == "__main__":
    main()
