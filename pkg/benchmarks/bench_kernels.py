"""Compare the JIT-compiled ensemble kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [n_seeds] [n_steps]

Times quad_sgd_final and quad_sgd_gap_mean on a pre-generated noise
matrix.  Run with ADASCALE_LAB_DISABLE_NUMBA=1 to confirm the fallback
selection; here both paths are imported explicitly so one process can
report both.
"""
import sys
import time

import numpy as np

from adascale_lab import kernels


def time_fn(fn, *args, repeats=5):
    fn(*args)  # warm-up (triggers JIT compilation on the fast path)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
    n_steps = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
    z = np.random.default_rng(0).standard_normal((n_seeds, n_steps))
    args = (1.0, 1.0, 0.1, 0.5, z)

    print(f"ensemble: {n_seeds} seeds x {n_steps} steps")
    print(f"numba available and enabled: {kernels.USE_NUMBA}")
    for label, fast, plain in (
        ("final", kernels.quad_sgd_final, kernels.quad_sgd_final_numpy),
        ("gap_mean", kernels.quad_sgd_gap_mean, kernels.quad_sgd_gap_mean_numpy),
    ):
        t_plain = time_fn(plain, *args)
        if kernels.USE_NUMBA:
            t_fast = time_fn(fast, *args)
            print(
                f"{label:9s} numpy {t_plain * 1e3:8.1f} ms   "
                f"numba {t_fast * 1e3:8.1f} ms   "
                f"speedup {t_plain / t_fast:5.2f}x"
            )
        else:
            print(f"{label:9s} numpy {t_plain * 1e3:8.1f} ms   (numba disabled)")


if __name__ == "__main__":
    main()
