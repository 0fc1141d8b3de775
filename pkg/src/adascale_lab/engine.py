"""Training loops over a simulated S-worker data-parallel harness.

``run_scaled_sgd`` runs plain scaled SGD under a fixed scaling rule;
``run_adascale`` runs the adaptive algorithm, which multiplies the base
learning rate by the estimated gain ratio, indexes the schedule by the
accumulated (scale-invariant) gain tau, and stops once tau reaches the
budget; ``run_elastic`` is the adaptive loop with abrupt scale changes.

Worker gradients come from per-(iteration, worker) counter-based RNG
substreams and are aggregated in fixed worker order, so traces are
bit-identical across reruns regardless of physical parallelism.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import rng as rng_mod
from .errors import ConfigError
from .gain import GainState, GainSample, gain_sample
from .objectives import StochasticObjective
from .schedules import LrSchedule, ScaledSchedule, apply_rule

# A run is flagged as diverged once the objective exceeds this value or
# any quantity in the update becomes non-finite.
DIVERGENCE_LIMIT = 1e12

TRACE_COLUMNS = ("t", "tau", "S", "r", "eta", "F", "grad_mean_sq", "grad_agg_sq")


@dataclass
class TrainConfig:
    """Full specification of one training run."""

    objective: StochasticObjective
    schedule: LrSchedule
    algorithm: str = "adascale"  # adascale | scaled_sgd
    rule: str = "identity"  # scaled_sgd only
    scale: int = 1
    elastic: list[tuple[float, int]] | None = None  # (start_tau, S) pairs
    total_iterations: int | None = None  # T, scaled_sgd
    total_si: int | None = None  # T_SI, adascale
    momentum: float = 0.0
    w0: np.ndarray | None = None
    gain_variant: str = "recommended"
    gain_theta: float | None = None
    gain_epsilon: float = 1e-6
    gain_exclude_current: bool = False
    warmup_fraction: float = 0.055
    T_target: int | None = None
    seed: int = 0
    snapshot_every: int | None = None

    def __post_init__(self):
        if self.algorithm not in ("adascale", "scaled_sgd"):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if (self.total_iterations is None) == (self.total_si is None):
            raise ConfigError("exactly one of total_iterations (T) and total_si "
                              "(T_SI) must be set")
        if self.algorithm == "scaled_sgd" and self.total_iterations is None:
            raise ConfigError("scaled_sgd requires total_iterations (T)")
        if self.algorithm == "adascale" and self.total_si is None:
            raise ConfigError("adascale requires total_si (T_SI)")
        if not (0.0 <= self.momentum < 1.0):
            raise ConfigError("momentum must lie in [0, 1)")
        if self.scale < 1:
            raise ConfigError("scale must be >= 1")

    def initial_point(self) -> np.ndarray:
        if self.w0 is not None:
            w0 = np.asarray(self.w0, dtype=np.float64)
            if w0.shape != (self.objective.dim,):
                raise ConfigError("w0 dimension mismatch")
            return w0.copy()
        return np.zeros(self.objective.dim)


@dataclass
class GradientBundle:
    per_worker: np.ndarray  # (S, d)
    mean: np.ndarray  # (d,)


@dataclass
class Trace:
    """Per-iteration log of one run plus its outcome."""

    t: np.ndarray
    tau: np.ndarray
    S: np.ndarray
    r: np.ndarray
    eta: np.ndarray
    F: np.ndarray
    grad_mean_sq: np.ndarray
    grad_agg_sq: np.ndarray
    final_w: np.ndarray
    final_F: float
    final_tau: float
    total_iterations: int
    diverged: bool
    seed: int
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def to_csv(self, f) -> None:
        """Write the trace as CSV with 17 significant digits."""
        close = False
        if isinstance(f, (str, bytes)):
            f = open(f, "w")
            close = True
        try:
            f.write(f"# seed = {self.seed}\n")
            f.write(",".join(TRACE_COLUMNS) + "\n")
            for i in range(len(self.t)):
                f.write(
                    f"{int(self.t[i])},{self.tau[i]:.17g},{int(self.S[i])},"
                    f"{self.r[i]:.17g},{self.eta[i]:.17g},{self.F[i]:.17g},"
                    f"{self.grad_mean_sq[i]:.17g},{self.grad_agg_sq[i]:.17g}\n"
                )
        finally:
            if close:
                f.close()

    def csv_text(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()

    def summary_text(self, config_echo: dict | None = None) -> str:
        lines = [
            f"seed = {self.seed}",
            f"final_F = {self.final_F:.17g}",
            f"total_iterations = {self.total_iterations}",
            f"final_tau = {self.final_tau:.17g}",
            f"diverged = {str(self.diverged).lower()}",
        ]
        for key, value in (config_echo or {}).items():
            lines.append(f"config.{key} = {value}")
        return "\n".join(lines) + "\n"


def compute_gradient(
    obj: StochasticObjective, w: np.ndarray, scale: int, seed: int, iteration: int
) -> GradientBundle:
    """Sample one independent batch per worker and aggregate the gradients."""
    if scale < 1:
        raise ConfigError("scale must be >= 1")
    grads = np.empty((scale, obj.dim))
    for i in range(scale):
        stream = rng_mod.worker_stream(seed, iteration, i)
        batch = obj.sample_batch(stream)
        batch.worker_index = i + 1
        grads[i] = obj.stochastic_gradient(w, batch)
    # Mean via deviations from the first row: exact when all worker
    # gradients coincide (numpy reductions are otherwise off by an ulp).
    mean = grads[0] + (grads - grads[0]).mean(axis=0)
    return GradientBundle(per_worker=grads, mean=mean)


def _active_scale(elastic: list[tuple[float, int]], tau: float) -> int:
    scale = elastic[0][1]
    for start, s in elastic:
        if tau >= start:
            scale = s
        else:
            break
    return scale


def _is_bad(F: float, w: np.ndarray, grads: np.ndarray) -> bool:
    return (
        not math.isfinite(F)
        or F > DIVERGENCE_LIMIT
        or not np.all(np.isfinite(w))
        or not np.all(np.isfinite(grads))
    )


class _Recorder:
    def __init__(self):
        self.rows = {name: [] for name in TRACE_COLUMNS}
        self.snapshots: list[tuple[int, np.ndarray]] = []

    def add(self, t, tau, S, r, eta, F, sample: GainSample):
        self.rows["t"].append(t)
        self.rows["tau"].append(tau)
        self.rows["S"].append(S)
        self.rows["r"].append(r)
        self.rows["eta"].append(eta)
        self.rows["F"].append(F)
        self.rows["grad_mean_sq"].append(sample.mean_sq_norm)
        self.rows["grad_agg_sq"].append(sample.agg_sq_norm)

    def trace(self, w, final_F, tau, diverged, seed) -> Trace:
        arrays = {k: np.asarray(v, dtype=np.float64) for k, v in self.rows.items()}
        arrays["t"] = arrays["t"].astype(np.int64)
        arrays["S"] = arrays["S"].astype(np.int64)
        return Trace(
            **arrays,
            final_w=w,
            final_F=final_F,
            final_tau=tau,
            total_iterations=len(arrays["t"]),
            diverged=diverged,
            seed=seed,
            snapshots=self.snapshots,
        )


def run_scaled_sgd(cfg: TrainConfig) -> Trace:
    """Scaled SGD under a fixed scaling rule for exactly T_S iterations."""
    if cfg.algorithm != "scaled_sgd":
        raise ConfigError("config does not request scaled_sgd")
    lr_fn, T = apply_rule(
        ScaledSchedule(
            base=cfg.schedule,
            rule=cfg.rule,
            scale=cfg.scale,
            T_1=cfg.total_iterations,
            warmup_fraction=cfg.warmup_fraction,
            T_target=cfg.T_target,
        )
    )
    obj = cfg.objective
    rule_gain = 1.0 if cfg.rule == "identity" else float(cfg.scale)
    w = cfg.initial_point()
    velocity = np.zeros(obj.dim)
    rec = _Recorder()
    diverged = False

    for t in range(T):
        bundle = compute_gradient(obj, w, cfg.scale, cfg.seed, t)
        sample = gain_sample(bundle.per_worker, bundle.mean)
        F = obj.value(w)
        eta = lr_fn(t)
        if _is_bad(F, w, bundle.per_worker):
            diverged = True
            rec.add(t, float(t), cfg.scale, rule_gain, eta, F, sample)
            break
        if cfg.snapshot_every and t % cfg.snapshot_every == 0:
            rec.snapshots.append((t, w.copy()))
        rec.add(t, float(t), cfg.scale, rule_gain, eta, F, sample)
        velocity = cfg.momentum * velocity + bundle.mean
        w = w - eta * velocity

    final_F = obj.value(w)
    if not math.isfinite(final_F) or final_F > DIVERGENCE_LIMIT:
        diverged = True
    return rec.trace(w, final_F, float(len(rec.rows["t"])), diverged, cfg.seed)


def run_adascale(cfg: TrainConfig) -> Trace:
    """Adaptive gain-scaled SGD with a fixed scale."""
    if cfg.algorithm != "adascale":
        raise ConfigError("config does not request adascale")
    if cfg.elastic is not None:
        raise ConfigError("use run_elastic for elastic scale schedules")
    return _adascale_loop(cfg, [(0.0, cfg.scale)])


def run_elastic(cfg: TrainConfig) -> Trace:
    """Adaptive loop with abrupt scale changes at given tau thresholds."""
    if cfg.algorithm != "adascale":
        raise ConfigError("elastic scaling applies to the adascale algorithm only")
    if not cfg.elastic:
        raise ConfigError("elastic schedule must be a non-empty list")
    elastic = [(float(start), int(s)) for start, s in cfg.elastic]
    starts = [start for start, _ in elastic]
    if starts != sorted(starts) or starts[0] != 0.0:
        raise ConfigError("elastic entries must be sorted by start_tau, first at 0")
    if any(s < 1 for _, s in elastic):
        raise ConfigError("elastic scales must be >= 1")
    return _adascale_loop(cfg, elastic)


def _adascale_loop(cfg: TrainConfig, elastic: list[tuple[float, int]]) -> Trace:
    obj = cfg.objective
    T_SI = cfg.total_si
    state = GainState(
        scale=elastic[0][1],
        variant=cfg.gain_variant,
        theta=cfg.gain_theta,
        epsilon=cfg.gain_epsilon,
        exclude_current=cfg.gain_exclude_current,
    )
    w = cfg.initial_point()
    velocity = np.zeros(obj.dim)
    rec = _Recorder()
    diverged = False
    tau = 0.0
    t = 0

    while tau < T_SI:
        scale = _active_scale(elastic, tau)
        if scale != state.scale:
            state.set_scale(scale)
        bundle = compute_gradient(obj, w, scale, cfg.seed, t)
        sample = gain_sample(bundle.per_worker, bundle.mean)
        r = state.update(sample)
        eta = r * cfg.schedule(math.floor(tau))
        F = obj.value(w)
        if _is_bad(F, w, bundle.per_worker):
            diverged = True
            rec.add(t, tau, scale, r, eta, F, sample)
            break
        if cfg.snapshot_every and t % cfg.snapshot_every == 0:
            rec.snapshots.append((t, w.copy()))
        rec.add(t, tau, scale, r, eta, F, sample)
        velocity = cfg.momentum * velocity + bundle.mean
        w = w - eta * velocity
        tau += r
        t += 1

    final_F = obj.value(w)
    if not math.isfinite(final_F) or final_F > DIVERGENCE_LIMIT:
        diverged = True
    return rec.trace(w, final_F, tau, diverged, cfg.seed)


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    """Copy of the config with a different master seed."""
    return replace(cfg, seed=seed)


def run(cfg: TrainConfig) -> Trace:
    """Dispatch on the configured algorithm."""
    if cfg.algorithm == "scaled_sgd":
        return run_scaled_sgd(cfg)
    if cfg.elastic is not None:
        return run_elastic(cfg)
    return run_adascale(cfg)
