"""Compare the compiled stencil kernels against the pure-numpy fallback.

Run directly::

    python3 benchmarks/bench_kernels.py [--n 256] [--reps 50]

The script times apply_five_point and upwind_divergence for both
backends on the same random data and prints the speedup.  The numpy
fallback is loaded explicitly so no subprocess / env juggling is needed.
"""

import argparse
import time

import numpy as np

from lakesim.kernels import apply_five_point, backend, upwind_divergence
from lakesim.kernels import _stencil_py as pure


def _timeit(fn, reps):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=256)
    ap.add_argument("--reps", type=int, default=50)
    args = ap.parse_args()
    n = args.n
    rng = np.random.default_rng(0)
    diag = rng.uniform(3, 5, (n, n))
    cx = rng.uniform(0.5, 1.5, (n - 1, n))
    cy = rng.uniform(0.5, 1.5, (n, n - 1))
    u = rng.standard_normal((n, n))
    out = np.empty_like(u)
    omega = rng.standard_normal((n, n))
    fx = rng.standard_normal((n + 1, n))
    fy = rng.standard_normal((n, n + 1))
    fx[0] = fx[-1] = 0.0
    fy[:, 0] = fy[:, -1] = 0.0
    dx = 2.0 / n

    print(f"grid {n}x{n}, active backend: {backend}")
    pairs = [
        ("apply_five_point",
         lambda: apply_five_point(diag, cx, cy, u, out),
         lambda: pure.apply_five_point(diag, cx, cy, u, out)),
        ("upwind_divergence",
         lambda: upwind_divergence(omega, fx, fy, dx),
         lambda: pure.upwind_divergence(omega, fx, fy, dx)),
    ]
    for name, fast, slow in pairs:
        # correctness first
        if name == "apply_five_point":
            a = np.empty_like(u)
            b = np.empty_like(u)
            apply_five_point(diag, cx, cy, u, a)
            pure.apply_five_point(diag, cx, cy, u, b)
            err = np.max(np.abs(a - b))
        else:
            a1, a2 = upwind_divergence(omega, fx, fy, dx)
            b1, b2 = pure.upwind_divergence(omega, fx, fy, dx)
            err = max(np.max(np.abs(a1 - b1)), np.max(np.abs(a2 - b2)))
        tf = _timeit(fast, args.reps)
        ts = _timeit(slow, args.reps)
        print(f"{name:20s} compiled {tf * 1e6:8.1f} us   "
              f"numpy {ts * 1e6:8.1f} us   speedup {ts / tf:5.2f}x   "
              f"max |diff| {err:.2e}")


if __name__ == "__main__":
    main()
