"""Convergence bounds for PL objectives and empirical verification helpers.

For an alpha-PL, beta-smooth objective trained with constant step size
eta and per-step gradient-noise variance bound V, the per-step contraction
factor is gamma = eta * alpha * (2 - eta * beta) and the noise floor is
Delta = eta^2 * beta * V / (2 * gamma).  Three bounds on E[F(w_T)] - F*:

* single-batch:     (1 - gamma)^T * gap0 + Delta
* gain-scaled, per-step gains r_t (each r_t * gamma < 1):
    product form:   gap0 * prod_t (1 - r_t * gamma) + Delta
    mean-gain form: (1 - gamma)^(sum_t r_t) * gap0 + Delta
* linear scaling at scale S (S * eta * beta < 2), with
  xi(S) = (2 - eta * beta) / (2 - S * eta * beta):
                    (1 - gamma / xi(S))^(S T) * gap0 + xi(S) * Delta

The verification helpers compare these to Monte-Carlo estimates over
ensembles of independently seeded runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, rng as rng_mod
from .engine import Trace
from .errors import DomainError

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class TheoryParams:
    """Constants (alpha, beta, eta, V, gap0) entering the bounds."""

    alpha: float  # PL constant
    beta: float  # smoothness constant
    eta: float  # constant step size
    V: float  # bound on the gradient-noise variance
    gap0: float  # initial suboptimality E[F(w_0)] - F*

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise DomainError("alpha and beta must be positive")
        if self.alpha > self.beta:
            raise DomainError("PL constant cannot exceed the smoothness constant")
        if not (0.0 < self.eta < 2.0 / self.beta):
            raise DomainError("need 0 < eta < 2 / beta")
        if self.V < 0 or self.gap0 < 0:
            raise DomainError("V and gap0 must be nonnegative")

    @property
    def gamma(self) -> float:
        return self.eta * self.alpha * (2.0 - self.eta * self.beta)

    @property
    def delta(self) -> float:
        if self.V == 0.0:
            return 0.0
        return self.eta**2 * self.beta * self.V / (2.0 * self.gamma)


def bound_single_batch(params: TheoryParams, T: int) -> float:
    """(1 - gamma)^T * gap0 + Delta."""
    if T < 0:
        raise DomainError("iteration count must be nonnegative")
    return (1.0 - params.gamma) ** T * params.gap0 + params.delta


def bound_adascale(params: TheoryParams, gains) -> tuple[float, float]:
    """Bounds after one gain-scaled run with per-step gains ``gains``.

    Returns ``(product_bound, mean_gain_bound)``.  The first multiplies
    the per-step contractions 1 - r_t * gamma directly; the second uses
    1 - r x <= (1 - x)^r to reduce to the single-batch form evaluated at
    the accumulated gain sum_t r_t.
    """
    gains = np.asarray(gains, dtype=np.float64)
    if gains.size and (gains.min() < 1.0):
        raise DomainError("gains must be >= 1")
    gamma = params.gamma
    if gains.size and gains.max() * gamma >= 1.0:
        raise DomainError(
            "bound undefined: some gain r satisfies r * gamma >= 1 "
            "(requires the scale to stay below 1 / gamma)"
        )
    product = float(np.prod(1.0 - gains * gamma)) * params.gap0 + params.delta
    mean_gain = (1.0 - gamma) ** float(gains.sum()) * params.gap0 + params.delta
    return product, mean_gain


def xi(params: TheoryParams, scale: int) -> float:
    """Noise-floor inflation factor of linear scaling."""
    denom = 2.0 - scale * params.eta * params.beta
    if denom <= 0.0:
        raise DomainError(
            f"linear scaling bound undefined at S = {scale}: "
            "need S * eta * beta < 2"
        )
    return (2.0 - params.eta * params.beta) / denom


def bound_linear(params: TheoryParams, scale: int, T: int) -> float:
    """(1 - gamma / xi(S))^(S T) * gap0 + xi(S) * Delta."""
    if T < 0:
        raise DomainError("iteration count must be nonnegative")
    x = xi(params, scale)
    return (1.0 - params.gamma / x) ** (scale * T) * params.gap0 + x * params.delta


@dataclass
class BoundCheck:
    """Outcome of an empirical bound check along a run ensemble."""

    iterations: np.ndarray  # checked iteration indices
    empirical_mean: np.ndarray
    ci_upper: np.ndarray  # mean + 1.96 * se
    bound: np.ndarray  # mean of per-seed product bounds
    passed: bool
    max_excess: float  # max over iterations of ci_upper - bound


def verify_bound_empirically(
    traces: list[Trace], params: TheoryParams, every: int = 10
) -> BoundCheck:
    """Check the per-step product bound against an ensemble of runs.

    For each trace the product bound is evaluated from that run's own
    gain sequence; the ensemble passes if at every checked iteration the
    upper 95% confidence limit of the mean suboptimality stays at or
    below the mean bound.  Iterations are checked every ``every`` steps
    up to the shortest run.
    """
    if not traces:
        raise DomainError("need at least one trace")
    T_min = min(t.total_iterations for t in traces)
    if T_min == 0:
        raise DomainError("traces are empty")
    checked = np.arange(0, T_min, every)
    n = len(traces)

    F = np.stack([t.F[:T_min] for t in traces])[:, checked]
    bounds = np.empty((n, len(checked)))
    for i, trace in enumerate(traces):
        factors = 1.0 - trace.r[:T_min] * params.gamma
        if factors.min() <= 0.0:
            raise DomainError("bound undefined: some gain r has r * gamma >= 1")
        cumulative = np.concatenate(([1.0], np.cumprod(factors)))
        bounds[i] = params.gap0 * cumulative[checked] + params.delta

    mean = F.mean(axis=0)
    se = F.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(mean)
    ci_upper = mean + Z_95 * se
    bound = bounds.mean(axis=0)
    excess = ci_upper - bound
    return BoundCheck(
        iterations=checked,
        empirical_mean=mean,
        ci_upper=ci_upper,
        bound=bound,
        passed=bool(np.all(excess <= 0.0)),
        max_excess=float(excess.max()),
    )


@dataclass
class ContinuumCheck:
    """Discrepancy between scaled and single-batch dynamics vs step count."""

    resolutions: np.ndarray  # nu values (steps per unit time)
    discrepancy: np.ndarray  # |mean final gap (scale S) - (scale 1)|
    ci_halfwidth: np.ndarray
    passed: bool


def verify_prop2(
    a: float = 1.0,
    sigma_sq: float = 1.0,
    eta: float = 0.2,
    T: int = 50,
    scale: int = 4,
    resolutions=(1, 10, 100),
    n_seeds: int = 5000,
    w0: float = 1.0,
    seed: int = 0,
    chunk: int = 1000,
) -> ContinuumCheck:
    """Scale-S and single-batch SGD agree in the many-small-steps limit.

    On a 1-D quadratic with curvature ``a``, per-batch gradient-noise
    variance ``sigma_sq``, and nominal step size ``eta`` over horizon
    ``T``, refine the discretisation by a factor nu: step size eta / nu,
    nu * T steps, noise variance nu * sigma_sq.  At each resolution the
    scale-S process takes S-fold larger steps on S-fold averaged noise.
    Both converge to the same diffusion, so the gap between their mean
    final suboptimalities must shrink as nu grows and be statistically
    indistinguishable from zero at the finest resolution.
    """
    resolutions = np.asarray(resolutions, dtype=np.int64)
    if np.any(resolutions < 1) or np.any(np.diff(resolutions) <= 0):
        raise DomainError("resolutions must be increasing positive integers")
    if n_seeds < 2:
        raise DomainError("need at least two seeds")

    diffs = np.empty(len(resolutions))
    halfwidths = np.empty(len(resolutions))
    for k, nu in enumerate(resolutions):
        nu = int(nu)
        specs = (
            # (process id, lr, noise sd, number of steps)
            (0, eta / nu, math.sqrt(nu * sigma_sq), nu * T),
            (1, scale * eta / nu, math.sqrt(nu * sigma_sq / scale),
             nu * T // scale),
        )
        means = np.empty(2)
        ses = np.empty(2)
        for pid, lr, noise_sd, steps in specs:
            gaps = np.empty(n_seeds)
            done = 0
            block = 0
            while done < n_seeds:
                m = min(chunk, n_seeds - done)
                stream = rng_mod.stream(
                    seed, rng_mod.LANE_ENSEMBLE, 1000 * k + block, pid
                )
                z = stream.standard_normal((m, steps))
                w = kernels.quad_sgd_final(float(w0), a, lr, noise_sd, z)
                gaps[done : done + m] = 0.5 * a * w * w
                done += m
                block += 1
            means[pid] = gaps.mean()
            ses[pid] = gaps.std(ddof=1) / math.sqrt(n_seeds)
        diffs[k] = abs(means[0] - means[1])
        halfwidths[k] = Z_95 * math.sqrt(ses[0] ** 2 + ses[1] ** 2)

    slack = diffs + halfwidths
    monotone = all(
        diffs[i + 1] <= diffs[i] + halfwidths[i] + halfwidths[i + 1]
        for i in range(len(diffs) - 1)
    )
    vanishes = diffs[-1] <= halfwidths[-1]
    shrinks = slack[-1] < max(diffs[0], halfwidths[0])
    return ContinuumCheck(
        resolutions=resolutions,
        discrepancy=diffs,
        ci_halfwidth=halfwidths,
        passed=bool(monotone and vanishes and shrinks),
    )


def curve_alignment(
    traces: list[Trace], grid, axis: str = "tau"
) -> np.ndarray:
    """Interpolate each trace's objective curve onto a common grid.

    ``axis`` selects the abscissa: accumulated gain (``tau``) or raw
    iteration index (``t``).  Returns an array of shape
    ``(len(traces), len(grid))``.  Grid points outside a trace's range
    raise :class:`DomainError` rather than extrapolating.
    """
    if axis not in ("tau", "t"):
        raise DomainError(f"unknown alignment axis {axis!r}")
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be non-empty and strictly increasing")
    out = np.empty((len(traces), grid.size))
    for i, trace in enumerate(traces):
        x = trace.tau if axis == "tau" else trace.t.astype(np.float64)
        if grid[0] < x[0] or grid[-1] > x[-1]:
            raise DomainError(
                f"grid range [{grid[0]}, {grid[-1]}] exceeds trace range "
                f"[{x[0]}, {x[-1]}] on axis {axis!r}"
            )
        out[i] = np.interp(grid, x, trace.F)
    return out


def max_pairwise_deviation(values: np.ndarray) -> float:
    """Largest |difference| between any two curves at any grid point."""
    values = np.atleast_2d(values)
    return float((values.max(axis=0) - values.min(axis=0)).max())


def steady_state_value(trace: Trace, fraction: float = 0.2) -> float:
    """Mean objective over the last ``fraction`` of iterations."""
    if not (0.0 < fraction <= 1.0):
        raise DomainError("fraction must lie in (0, 1]")
    n = trace.total_iterations
    start = max(n - max(int(round(fraction * n)), 1), 0)
    return float(trace.F[start:].mean())
