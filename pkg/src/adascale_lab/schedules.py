"""Learning-rate schedule families and fixed scaling rules.

A base :class:`LrSchedule` describes single-batch training.  A
:class:`ScaledSchedule` applies one of the fixed scaling rules to it:

* ``identity`` -- keep the schedule and horizon unchanged.
* ``linear``   -- multiply the rate by the scale and shrink the horizon,
  lr_S(t) = S * lr_1(S t), T_S = ceil(T_1 / S).
* ``lsw``      -- linear scaling with a linear warm-up over the first
  5.5% of iterations (rate rises from lr_1(0) to S * lr_1(0)).
* ``lsw_plus`` -- the lsw schedule stretched along the iteration axis to
  a caller-chosen total length.

All schedules are pure functions of the iteration index.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import ConfigError

FAMILIES = ("constant", "exponential_decay", "step_decay")
RULES = ("identity", "linear", "lsw", "lsw_plus")


@dataclass(frozen=True)
class LrSchedule:
    """Single-batch schedule: constant, exponential decay, or step decay.

    Exponential decay evaluates eta0 * d**(t / T_S1); step decay drops by
    a factor ``d`` after each milestone.
    """

    family: str = "constant"
    eta0: float = 0.1
    d: float = 1.0
    milestones: tuple[int, ...] = ()
    T_S1: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown schedule family {self.family!r}")
        if self.eta0 <= 0:
            raise ConfigError("eta0 must be positive")
        if not (0.0 < self.d <= 1.0):
            raise ConfigError("decay factor d must lie in (0, 1]")
        if self.family == "exponential_decay" and self.T_S1 < 1:
            raise ConfigError("exponential decay needs a positive horizon T_S1")
        if list(self.milestones) != sorted(set(self.milestones)):
            raise ConfigError("milestones must be strictly increasing")
        object.__setattr__(self, "milestones", tuple(int(m) for m in self.milestones))

    def __call__(self, t: float) -> float:
        if t < 0:
            raise ConfigError("schedule evaluated at negative iteration")
        if self.family == "constant":
            return self.eta0
        if self.family == "exponential_decay":
            return self.eta0 * self.d ** (t / self.T_S1)
        drops = sum(1 for m in self.milestones if t > m)
        return self.eta0 * self.d**drops


def lr_eval(schedule: LrSchedule, t: float) -> float:
    return schedule(t)


@dataclass(frozen=True)
class ScaledSchedule:
    base: LrSchedule
    rule: str = "identity"
    scale: int = 1
    T_1: int = 1
    warmup_fraction: float = 0.055
    T_target: int | None = None

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown scaling rule {self.rule!r}")
        if self.scale < 1 or self.T_1 < 1:
            raise ConfigError("need scale >= 1 and T_1 >= 1")
        if not (0.0 < self.warmup_fraction < 1.0):
            raise ConfigError("warmup_fraction must lie in (0, 1)")


def apply_rule(sch: ScaledSchedule) -> tuple[Callable[[int], float], int]:
    """Resolve a scaled schedule to (lr_S, T_S)."""
    base, S, T_1 = sch.base, sch.scale, sch.T_1

    if sch.rule == "identity":
        return base, T_1

    T_S = math.ceil(T_1 / S)
    if sch.rule == "linear":
        return (lambda t: S * base(S * t)), T_S

    # lsw and lsw_plus share the warm-up construction.
    warmup = math.ceil(sch.warmup_fraction * T_S)
    lr0 = base(0)

    def lsw_lr(t: float) -> float:
        if t <= warmup:
            return lr0 * (1.0 + (S - 1.0) * t / warmup)
        if base.family == "exponential_decay":
            # Compress the post-warm-up schedule: the remaining T_S - warmup
            # iterations traverse the rest of the single-batch schedule at
            # uniform speed (slightly faster decay than plain linear scaling).
            position = S * warmup + (t - warmup) * (T_1 - S * warmup) / (T_S - warmup)
            return S * base(position)
        # Step decay / constant: skip ahead by one warm-up's worth.
        return S * base(S * (t + warmup))

    if sch.rule == "lsw":
        return lsw_lr, T_S

    # lsw_plus: stretch the lsw schedule to T_target iterations.
    if sch.T_target is None:
        raise ConfigError("lsw_plus requires T_target")
    T_target = int(sch.T_target)
    if T_target < T_S:
        raise ConfigError(
            f"lsw_plus target length {T_target} is shorter than the lsw length {T_S}"
        )

    def lsw_plus_lr(t: float) -> float:
        return lsw_lr(math.floor(t * T_S / T_target))

    return lsw_plus_lr, T_target
