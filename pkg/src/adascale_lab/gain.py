"""Gain-ratio estimation.

The gain ratio r in [1, S] measures how many single-batch steps one
scale-S step is worth:

    r = E[sigma^2 + mu^2] / E[sigma^2 / S + mu^2]

where mu^2 is the squared true-gradient norm and sigma^2 the total
per-batch gradient variance.  This module provides:

* the exact value for objectives with analytic moments,
* an offline Monte-Carlo estimate at a fixed parameter vector,
* two online estimator variants fed by per-iteration gradient norms:
  ``recommended`` (ratio of epsilon-stabilised moving averages) and
  ``separated`` (unbiased variance/mean estimates with clamps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapabilityError, ConfigError

DEFAULT_EPSILON = 1e-6
VARIANTS = ("recommended", "separated")


def default_theta(scale: int) -> float:
    """Default moving-average parameter, max(1 - S/1000, 0)."""
    return max(1.0 - scale / 1000.0, 0.0)


@dataclass
class GainSample:
    """Squared-norm statistics of one iteration's gradients.

    ``mean_sq_norm`` is the mean of the per-worker squared gradient norms
    and ``agg_sq_norm`` the squared norm of their average.  The first
    exceeds the second only in expectation, not per sample.
    """

    mean_sq_norm: float
    agg_sq_norm: float
    scale: int


def gain_sample(grads: np.ndarray, agg: np.ndarray) -> GainSample:
    grads = np.atleast_2d(np.asarray(grads, dtype=np.float64))
    scale = grads.shape[0]
    if scale == 0:
        raise ConfigError("gain sample needs at least one worker gradient")
    agg = np.asarray(agg, dtype=np.float64)
    agg_sq = float(np.einsum("j,j->", agg, agg))
    # Variance decomposition instead of a direct mean of row norms: the
    # scatter term vanishes exactly when all worker gradients coincide,
    # so zero-variance objectives yield mean_sq == agg_sq bitwise.
    diffs = grads - agg
    scatter = float(np.mean(np.einsum("ij,ij->i", diffs, diffs)))
    return GainSample(agg_sq + scatter, agg_sq, scale)


class GainState:
    """Online gain estimator state (single writer, one update per iteration).

    ``theta=None`` derives the moving-average parameter from the scale and
    re-derives it whenever the scale changes (elastic runs).  While fewer
    than 1/(1-theta) samples have been absorbed, plain running means are
    used instead of the exponential average.  With ``exclude_current`` the
    estimate returned by :meth:`update` ignores the sample being absorbed.
    """

    def __init__(
        self,
        scale: int,
        variant: str = "recommended",
        theta: float | None = None,
        epsilon: float = DEFAULT_EPSILON,
        exclude_current: bool = False,
    ):
        if variant not in VARIANTS:
            raise ConfigError(f"unknown gain variant {variant!r}")
        if scale < 1:
            raise ConfigError("scale must be >= 1")
        if variant == "separated" and scale < 2:
            raise CapabilityError(
                "the separated estimator needs S >= 2; use the recommended variant"
            )
        if epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if theta is not None and not (0.0 <= theta < 1.0):
            raise ConfigError("theta must lie in [0, 1)")
        self.variant = variant
        self.scale = int(scale)
        self._auto_theta = theta is None
        self.theta = default_theta(scale) if theta is None else float(theta)
        self.epsilon = float(epsilon)
        self.exclude_current = bool(exclude_current)
        self.count = 0
        # recommended: (m1, m2); separated: (sigma_bar^2, mu_bar^2)
        self._avg = [0.0, 0.0]

    def set_scale(self, scale: int) -> None:
        """Switch the active scale, keeping accumulated averages."""
        if scale < 1:
            raise ConfigError("scale must be >= 1")
        if self.variant == "separated" and scale < 2:
            raise CapabilityError("the separated estimator needs S >= 2")
        self.scale = int(scale)
        if self._auto_theta:
            self.theta = default_theta(scale)

    def _burn_in(self) -> float:
        return 1.0 / (1.0 - self.theta)

    def _absorb(self, sample: GainSample) -> None:
        if self.variant == "recommended":
            values = (sample.mean_sq_norm, sample.agg_sq_norm)
        else:
            S = sample.scale
            if S < 2:
                raise CapabilityError("the separated estimator needs S >= 2")
            sigma_hat = S / (S - 1.0) * (sample.mean_sq_norm - sample.agg_sq_norm)
            mu_hat = sample.agg_sq_norm - sigma_hat / S
            values = (max(sigma_hat, self.epsilon), max(mu_hat, 0.0))
        n = self.count + 1
        for k, x in enumerate(values):
            if n <= self._burn_in():
                self._avg[k] += (x - self._avg[k]) / n
            else:
                self._avg[k] = self.theta * self._avg[k] + (1.0 - self.theta) * x
        self.count = n

    def estimate(self) -> float:
        """Current gain estimate, clamped to [1, scale]."""
        if self.variant == "recommended":
            ratio = (self._avg[0] + self.epsilon) / (self._avg[1] + self.epsilon)
        else:
            if self.count == 0:
                return 1.0
            sigma_bar, mu_bar = self._avg
            ratio = (sigma_bar + mu_bar) / (sigma_bar / self.scale + mu_bar)
        return min(max(ratio, 1.0), float(self.scale))

    def update(self, sample: GainSample) -> float:
        """Absorb one iteration's sample and return the gain estimate."""
        if self.exclude_current:
            r = self.estimate()
            self._absorb(sample)
            return r
        first = self.count == 0
        self._absorb(sample)
        if self.variant == "separated" and first:
            return 1.0
        return self.estimate()


def update_recommended(state: GainState, sample: GainSample) -> float:
    if state.variant != "recommended":
        raise ConfigError("state is not a recommended-variant estimator")
    return state.update(sample)


def update_separated(state: GainState, sample: GainSample) -> float:
    if state.variant != "separated":
        raise ConfigError("state is not a separated-variant estimator")
    return state.update(sample)


def analytic_gain(obj, w: np.ndarray, scale: int) -> float:
    """Exact gain ratio for objectives with analytic moments."""
    if not hasattr(obj, "analytic_moments"):
        raise CapabilityError("objective has no analytic gradient moments")
    mu_sq, sigma_sq = obj.analytic_moments(w)
    denom = sigma_sq / scale + mu_sq
    if denom == 0.0:
        return 1.0
    return (sigma_sq + mu_sq) / denom


def oracle_gain(
    obj,
    w: np.ndarray,
    scale: int,
    n_batches: int = 1000,
    rng: np.random.Generator | None = None,
) -> float:
    """Offline Monte-Carlo gain estimate from ``n_batches`` fresh gradients."""
    if n_batches < 2:
        raise ConfigError("oracle estimate needs n_batches >= 2")
    if rng is None:
        rng = np.random.default_rng(0)
    grads = np.empty((n_batches, obj.dim))
    for i in range(n_batches):
        grads[i] = obj.stochastic_gradient(w, obj.sample_batch(rng))
    mean_grad = grads.mean(axis=0)
    centered = grads - mean_grad
    sigma_hat = float(np.sum(centered * centered)) / (n_batches - 1)
    mu_hat = max(float(mean_grad @ mean_grad) - sigma_hat / n_batches, 0.0)
    denom = sigma_hat / scale + mu_hat
    if denom == 0.0:
        return 1.0
    r = (sigma_hat + mu_hat) / denom
    return min(max(r, 1.0), float(scale))
