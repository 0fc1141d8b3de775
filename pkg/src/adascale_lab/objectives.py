"""Synthetic stochastic objectives F(w) = E[f(w, x)].

Two families are provided:

* :class:`NoisyQuadratic` -- a quadratic bowl with additive Gaussian
  gradient noise.  All gradient moments are available in closed form,
  which makes it the workhorse for estimator- and bound-verification.
* :class:`GeneratedClassifier` -- a finite, seed-generated classification
  dataset (logistic regression or a one-hidden-layer tanh network) whose
  objective is the mean loss over the dataset.  Sampling batches with
  replacement yields unbiased stochastic gradients.

Evaluation and sampling are pure given an explicit RNG stream, so
objectives are safe to share across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Protocol, runtime_checkable

import numpy as np

from .errors import CapabilityError, ConfigError


@dataclass
class Batch:
    """One worker's sample: objective-specific payload plus worker index."""

    payload: Any
    worker_index: int = 1


@runtime_checkable
class StochasticObjective(Protocol):
    dim: int

    def sample_batch(self, rng: np.random.Generator) -> Batch: ...

    def stochastic_gradient(self, w: np.ndarray, batch: Batch) -> np.ndarray: ...

    def true_gradient(self, w: np.ndarray) -> np.ndarray: ...

    def value(self, w: np.ndarray) -> float: ...


def _check_dim(obj: "StochasticObjective", w: np.ndarray) -> np.ndarray:
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (obj.dim,):
        raise ConfigError(
            f"parameter vector has shape {w.shape}, expected ({obj.dim},)"
        )
    return w


class NoisyQuadratic:
    """Quadratic objective with state-independent Gaussian gradient noise.

    F(w) = 0.5 (w - w*)' A (w - w*), with stochastic gradients
    g = A (w - w*) + xi where xi ~ N(0, nu * Sigma).  The trace of the
    noise covariance, the squared true-gradient norm, and the PL and
    smoothness constants are all exact.
    """

    def __init__(
        self,
        a_matrix: np.ndarray,
        noise_cov: np.ndarray | None = None,
        w_star: np.ndarray | None = None,
        noise_scale: float = 1.0,
    ):
        A = np.atleast_2d(np.asarray(a_matrix, dtype=np.float64))
        if A.shape[0] != A.shape[1]:
            raise ConfigError("curvature matrix must be square")
        if not np.allclose(A, A.T):
            raise ConfigError("curvature matrix must be symmetric")
        eigs = np.linalg.eigvalsh(A)
        if eigs[0] <= 0:
            raise ConfigError("curvature matrix must be positive definite")
        d = A.shape[0]

        if noise_cov is None:
            Sigma = np.zeros((d, d))
        else:
            Sigma = np.atleast_2d(np.asarray(noise_cov, dtype=np.float64))
        if Sigma.shape != (d, d) or not np.allclose(Sigma, Sigma.T):
            raise ConfigError("noise covariance must be symmetric d x d")
        if noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")
        sig_eigs, sig_vecs = np.linalg.eigh(noise_scale * Sigma)
        if sig_eigs[0] < -1e-12 * max(1.0, abs(sig_eigs[-1])):
            raise ConfigError("noise covariance must be positive semidefinite")
        sig_eigs = np.clip(sig_eigs, 0.0, None)

        self.dim = d
        self.A = A
        self.Sigma = Sigma
        self.noise_scale = float(noise_scale)
        self.w_star = (
            np.zeros(d) if w_star is None else np.asarray(w_star, dtype=np.float64)
        )
        if self.w_star.shape != (d,):
            raise ConfigError("w_star dimension mismatch")
        # Factor L with L L' = nu * Sigma, used to colour standard normals.
        self._noise_factor = sig_vecs * np.sqrt(sig_eigs)
        self.noise_trace = float(np.trace(noise_scale * Sigma))
        self.pl_constant = float(eigs[0])
        self.smoothness = float(eigs[-1])

    @classmethod
    def diagonal(
        cls,
        a_diag,
        noise_diag=0.0,
        w_star=None,
        noise_scale: float = 1.0,
    ) -> "NoisyQuadratic":
        """Convenience constructor from diagonal curvature / noise."""
        a = np.atleast_1d(np.asarray(a_diag, dtype=np.float64))
        n = np.asarray(noise_diag, dtype=np.float64)
        if n.ndim == 0:
            n = np.full(a.shape, float(n))
        if n.shape != a.shape:
            raise ConfigError("a_diag and noise_diag must have equal length")
        return cls(np.diag(a), np.diag(n), w_star=w_star, noise_scale=noise_scale)

    def sample_batch(self, rng: np.random.Generator) -> Batch:
        noise = self._noise_factor @ rng.standard_normal(self.dim)
        return Batch(payload=noise)

    def stochastic_gradient(self, w: np.ndarray, batch: Batch) -> np.ndarray:
        w = _check_dim(self, w)
        return self.A @ (w - self.w_star) + batch.payload

    def true_gradient(self, w: np.ndarray) -> np.ndarray:
        w = _check_dim(self, w)
        return self.A @ (w - self.w_star)

    def value(self, w: np.ndarray) -> float:
        w = _check_dim(self, w)
        delta = w - self.w_star
        return 0.5 * float(delta @ self.A @ delta)

    def optimum_value(self) -> float:
        return 0.0

    def analytic_moments(self, w: np.ndarray) -> tuple[float, float]:
        """Exact (squared true-gradient norm, gradient-noise variance)."""
        g = self.true_gradient(w)
        return float(g @ g), self.noise_trace


class GeneratedClassifier:
    """Finite two-cluster classification dataset generated from a seed.

    ``model="logistic"`` fits a linear logit with bias; ``model="mlp"``
    fits a one-hidden-layer tanh network.  F(w) is the mean logistic
    loss over the fixed dataset.  Batches are index multisets drawn with
    replacement, so stochastic gradients are unbiased.
    """

    def __init__(
        self,
        model: str = "logistic",
        n_examples: int = 200,
        n_features: int = 5,
        hidden: int = 8,
        batch_size: int = 8,
        data_seed: int = 7,
        cluster_sep: float = 2.0,
    ):
        if model not in ("logistic", "mlp"):
            raise ConfigError(f"unknown classifier model {model!r}")
        if n_examples < 2 or batch_size < 1:
            raise ConfigError("need n_examples >= 2 and batch_size >= 1")
        self.model = model
        self.n_examples = int(n_examples)
        self.n_features = int(n_features)
        self.hidden = int(hidden)
        self.batch_size = int(batch_size)
        self.data_seed = int(data_seed)

        rng = np.random.default_rng(data_seed)
        labels = rng.integers(0, 2, size=n_examples)
        direction = np.zeros(n_features)
        direction[0] = 1.0
        centers = np.where(labels[:, None] == 1, 1.0, -1.0) * (
            0.5 * cluster_sep * direction
        )
        self.X = centers + rng.standard_normal((n_examples, n_features))
        self.signs = np.where(labels == 1, 1.0, -1.0)

        if model == "logistic":
            self.dim = n_features + 1
        else:
            self.dim = hidden * n_features + hidden + hidden + 1

    # -- internal loss/gradient kernels ------------------------------------

    def _unpack(self, w: np.ndarray):
        h, p = self.hidden, self.n_features
        W1 = w[: h * p].reshape(h, p)
        b1 = w[h * p : h * p + h]
        w2 = w[h * p + h : h * p + 2 * h]
        b2 = w[-1]
        return W1, b1, w2, b2

    def _logits(self, w: np.ndarray, X: np.ndarray):
        if self.model == "logistic":
            return X @ w[:-1] + w[-1], None
        W1, b1, w2, b2 = self._unpack(w)
        hidden_act = np.tanh(X @ W1.T + b1)
        return hidden_act @ w2 + b2, hidden_act

    def _loss_and_grad(self, w: np.ndarray, idx: np.ndarray):
        X = self.X[idx]
        s = self.signs[idx]
        z, hidden_act = self._logits(w, X)
        margins = s * z
        loss = float(np.mean(np.logaddexp(0.0, -margins)))
        # d loss / d z for each example, already averaged.
        dz = -s / (1.0 + np.exp(margins)) / len(idx)
        grad = np.empty(self.dim)
        if self.model == "logistic":
            grad[:-1] = X.T @ dz
            grad[-1] = np.sum(dz)
        else:
            W1, b1, w2, b2 = self._unpack(w)
            h, p = self.hidden, self.n_features
            dhidden = np.outer(dz, w2) * (1.0 - hidden_act**2)
            grad[: h * p] = (dhidden.T @ X).reshape(-1)
            grad[h * p : h * p + h] = dhidden.sum(axis=0)
            grad[h * p + h : h * p + 2 * h] = hidden_act.T @ dz
            grad[-1] = np.sum(dz)
        return loss, grad

    # -- objective protocol -------------------------------------------------

    def sample_batch(self, rng: np.random.Generator) -> Batch:
        idx = rng.integers(0, self.n_examples, size=self.batch_size)
        return Batch(payload=idx)

    def stochastic_gradient(self, w: np.ndarray, batch: Batch) -> np.ndarray:
        w = _check_dim(self, w)
        return self._loss_and_grad(w, np.asarray(batch.payload))[1]

    def true_gradient(self, w: np.ndarray) -> np.ndarray:
        w = _check_dim(self, w)
        return self._loss_and_grad(w, np.arange(self.n_examples))[1]

    def value(self, w: np.ndarray) -> float:
        w = _check_dim(self, w)
        return self._loss_and_grad(w, np.arange(self.n_examples))[0]


# -- free-function forms of the core operations -----------------------------


def sample_batches(
    obj: StochasticObjective, scale: int, rng: np.random.Generator
) -> list[Batch]:
    """Draw ``scale`` jointly independent batches from one RNG stream."""
    if scale < 1:
        raise ConfigError("scale must be >= 1")
    batches = []
    for i in range(scale):
        batch = obj.sample_batch(rng)
        batch.worker_index = i + 1
        batches.append(batch)
    return batches


def stochastic_gradient(obj, w, batch: Batch) -> np.ndarray:
    return obj.stochastic_gradient(w, batch)


def true_gradient(obj, w) -> np.ndarray:
    if not hasattr(obj, "true_gradient"):
        raise CapabilityError("objective does not expose an exact gradient")
    return obj.true_gradient(w)


def objective_value(obj, w) -> float:
    return obj.value(w)


def analytic_moments(obj, w) -> tuple[float, float]:
    """Exact (mu^2, sigma^2) for objectives that support them."""
    if not hasattr(obj, "analytic_moments"):
        raise CapabilityError("objective has no analytic gradient moments")
    return obj.analytic_moments(w)
