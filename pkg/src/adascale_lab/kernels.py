"""Hot numeric kernels with a numba fast path.

The ensemble simulators below dominate the runtime of the Monte-Carlo
verification suites, so they are JIT-compiled when numba is available.
Set ``ADASCALE_LAB_DISABLE_NUMBA=1`` to force the pure-numpy fallback
(`benchmarks/bench_kernels.py` compares the two paths).

Noise is always pre-generated by the caller from counter-based streams,
so both paths are deterministic for a given seed.
"""
from __future__ import annotations

import os

import numpy as np


def _numba_enabled() -> bool:
    if os.environ.get("ADASCALE_LAB_DISABLE_NUMBA", "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


USE_NUMBA = _numba_enabled()


def quad_sgd_final_numpy(
    w0: float, a: float, lr: float, noise_sd: float, z: np.ndarray
) -> np.ndarray:
    """Final offsets of an SGD ensemble on a 1-D quadratic.

    Runs w <- w - lr * (a * w + noise_sd * z[i, t]) for every row of the
    pre-generated standard normals ``z`` and returns the final w per row.
    ``w0`` is the initial offset from the minimizer.
    """
    w = np.full(z.shape[0], w0)
    for t in range(z.shape[1]):
        w = w - lr * (a * w + noise_sd * z[:, t])
    return w


def quad_sgd_gap_mean_numpy(
    w0: float, a: float, lr: float, noise_sd: float, z: np.ndarray
) -> np.ndarray:
    """Per-step ensemble mean of the suboptimality 0.5 * a * w^2."""
    n, steps = z.shape
    w = np.full(n, w0)
    out = np.empty(steps + 1)
    out[0] = 0.5 * a * w0 * w0
    for t in range(steps):
        w = w - lr * (a * w + noise_sd * z[:, t])
        out[t + 1] = 0.5 * a * float(np.mean(w * w))
    return out


if USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def quad_sgd_final(w0, a, lr, noise_sd, z):  # pragma: no cover - jitted
        n, steps = z.shape
        out = np.empty(n)
        for i in range(n):
            w = w0
            for t in range(steps):
                w = w - lr * (a * w + noise_sd * z[i, t])
            out[i] = w
        return out

    @njit(cache=True)
    def quad_sgd_gap_mean(w0, a, lr, noise_sd, z):  # pragma: no cover - jitted
        n, steps = z.shape
        out = np.zeros(steps + 1)
        out[0] = 0.5 * a * w0 * w0
        for i in range(n):
            w = w0
            for t in range(steps):
                w = w - lr * (a * w + noise_sd * z[i, t])
                out[t + 1] += 0.5 * a * w * w
        out[1:] /= n
        return out

else:
    quad_sgd_final = quad_sgd_final_numpy
    quad_sgd_gap_mean = quad_sgd_gap_mean_numpy
