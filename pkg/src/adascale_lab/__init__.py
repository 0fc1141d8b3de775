"""Desk-scale laboratory for gain-scaled large-batch SGD.

Simulates S-worker data-parallel SGD on synthetic stochastic objectives,
implements fixed learning-rate scaling rules and the adaptive gain-ratio
algorithm, and verifies the associated convergence bounds empirically.
"""
from .analysis import (
    TheoryParams,
    bound_adascale,
    bound_linear,
    bound_single_batch,
    curve_alignment,
    verify_bound_empirically,
    verify_prop2,
)
from .engine import (
    TrainConfig,
    Trace,
    compute_gradient,
    run,
    run_adascale,
    run_elastic,
    run_scaled_sgd,
)
from .errors import CapabilityError, ConfigError, DomainError
from .gain import GainSample, GainState, analytic_gain, gain_sample, oracle_gain
from .objectives import Batch, GeneratedClassifier, NoisyQuadratic, StochasticObjective
from .schedules import LrSchedule, ScaledSchedule, apply_rule, lr_eval

__version__ = "0.1.0"

__all__ = [
    "TheoryParams",
    "bound_adascale",
    "bound_linear",
    "bound_single_batch",
    "curve_alignment",
    "verify_bound_empirically",
    "verify_prop2",
    "TrainConfig",
    "Trace",
    "compute_gradient",
    "run",
    "run_adascale",
    "run_elastic",
    "run_scaled_sgd",
    "CapabilityError",
    "ConfigError",
    "DomainError",
    "GainSample",
    "GainState",
    "analytic_gain",
    "gain_sample",
    "oracle_gain",
    "Batch",
    "GeneratedClassifier",
    "NoisyQuadratic",
    "StochasticObjective",
    "LrSchedule",
    "ScaledSchedule",
    "apply_rule",
    "lr_eval",
    "__version__",
]
