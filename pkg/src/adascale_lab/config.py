"""Flat key-value experiment configs.

A config is plain text, one ``key = value`` pair per line, with dotted
section prefixes: ``objective.*``, ``schedule.*``, ``gain.*``, ``run.*``
and optionally ``sweep.*``.  Lines starting with ``#`` and blank lines
are ignored.  Parsing and serialization round-trip exactly.

Example::

    objective.kind = noisy_quadratic
    objective.dim = 8
    objective.noise_diag = 2.0
    schedule.family = constant
    schedule.eta0 = 0.01
    run.algorithm = adascale
    run.scale = 16
    run.T_SI = 320
"""
from __future__ import annotations

import numpy as np

from .engine import TrainConfig
from .errors import ConfigError
from .objectives import GeneratedClassifier, NoisyQuadratic
from .schedules import LrSchedule


def parse_config(text: str) -> dict[str, str]:
    """Parse config text into an ordered flat mapping."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def serialize_config(cfg: dict[str, str]) -> str:
    return "".join(f"{key} = {value}\n" for key, value in cfg.items())


def load_config(path) -> dict[str, str]:
    with open(path) as f:
        return parse_config(f.read())


# -- typed accessors ---------------------------------------------------------


def _get(cfg, key, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def _as_int(key, value):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _as_float(key, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _as_bool(key, value):
    v = str(value).strip().lower()
    if v in ("true", "1", "yes"):
        return True
    if v in ("false", "0", "no"):
        return False
    raise ConfigError(f"{key} must be a boolean, got {value!r}")


def _float_list(key, value):
    try:
        return [float(x) for x in str(value).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be a comma-separated number list") from None


def parse_elastic(value: str) -> list[tuple[float, int]]:
    """Parse an elastic scale schedule like ``0:2,250:8,500:32``."""
    out = []
    for piece in str(value).split(","):
        piece = piece.strip()
        if not piece:
            continue
        if ":" not in piece:
            raise ConfigError(
                f"elastic entry {piece!r} must look like start_tau:scale"
            )
        start, scale = piece.split(":", 1)
        out.append((_as_float("run.elastic", start), _as_int("run.elastic", scale)))
    if not out:
        raise ConfigError("elastic schedule is empty")
    return out


def format_elastic(elastic: list[tuple[float, int]]) -> str:
    return ",".join(f"{start:g}:{scale}" for start, scale in elastic)


# -- builders ----------------------------------------------------------------


def build_objective(cfg: dict[str, str]):
    kind = _get(cfg, "objective.kind", required=True)
    if kind == "noisy_quadratic":
        dim = _as_int("objective.dim", _get(cfg, "objective.dim", "1"))
        a_diag = _float_list("objective.a_diag", _get(cfg, "objective.a_diag", "1.0"))
        if len(a_diag) == 1:
            a_diag = a_diag * dim
        if len(a_diag) != dim:
            raise ConfigError("objective.a_diag length must equal objective.dim")
        noise = _float_list(
            "objective.noise_diag", _get(cfg, "objective.noise_diag", "0.0")
        )
        if len(noise) == 1:
            noise = noise * dim
        if len(noise) != dim:
            raise ConfigError("objective.noise_diag length must equal objective.dim")
        w_star = None
        if "objective.w_star" in cfg:
            w_star = np.asarray(_float_list("objective.w_star", cfg["objective.w_star"]))
        scale = _as_float(
            "objective.noise_scale", _get(cfg, "objective.noise_scale", "1.0")
        )
        return NoisyQuadratic.diagonal(a_diag, noise, w_star=w_star, noise_scale=scale)
    if kind == "classifier":
        return GeneratedClassifier(
            model=_get(cfg, "objective.model", "logistic"),
            n_examples=_as_int(
                "objective.n_examples", _get(cfg, "objective.n_examples", "200")
            ),
            n_features=_as_int(
                "objective.n_features", _get(cfg, "objective.n_features", "5")
            ),
            hidden=_as_int("objective.hidden", _get(cfg, "objective.hidden", "8")),
            batch_size=_as_int(
                "objective.batch_size", _get(cfg, "objective.batch_size", "8")
            ),
            data_seed=_as_int(
                "objective.data_seed", _get(cfg, "objective.data_seed", "7")
            ),
            cluster_sep=_as_float(
                "objective.cluster_sep", _get(cfg, "objective.cluster_sep", "2.0")
            ),
        )
    raise ConfigError(f"unknown objective.kind {kind!r}")


def build_schedule(cfg: dict[str, str]) -> LrSchedule:
    milestones = _get(cfg, "schedule.milestones", "")
    return LrSchedule(
        family=_get(cfg, "schedule.family", "constant"),
        eta0=_as_float("schedule.eta0", _get(cfg, "schedule.eta0", required=True)),
        d=_as_float("schedule.d", _get(cfg, "schedule.d", "1.0")),
        milestones=tuple(
            int(x) for x in _float_list("schedule.milestones", milestones)
        ),
        T_S1=_as_int("schedule.T_S1", _get(cfg, "schedule.T_S1", "1")),
    )


def build_train_config(cfg: dict[str, str]) -> TrainConfig:
    objective = build_objective(cfg)
    schedule = build_schedule(cfg)

    theta = _get(cfg, "gain.theta")
    w0 = None
    if "run.w0" in cfg:
        w0 = np.asarray(_float_list("run.w0", cfg["run.w0"]))
    elastic = None
    if "run.elastic" in cfg:
        elastic = parse_elastic(cfg["run.elastic"])
    T = cfg.get("run.T")
    T_SI = cfg.get("run.T_SI")
    T_target = _get(cfg, "run.T_target")
    snap = _get(cfg, "run.snapshot_every")

    return TrainConfig(
        objective=objective,
        schedule=schedule,
        algorithm=_get(cfg, "run.algorithm", "adascale"),
        rule=_get(cfg, "run.rule", "identity"),
        scale=_as_int("run.scale", _get(cfg, "run.scale", "1")),
        elastic=elastic,
        total_iterations=None if T is None else _as_int("run.T", T),
        total_si=None if T_SI is None else _as_int("run.T_SI", T_SI),
        momentum=_as_float("run.momentum", _get(cfg, "run.momentum", "0.0")),
        w0=w0,
        gain_variant=_get(cfg, "gain.variant", "recommended"),
        gain_theta=None if theta is None else _as_float("gain.theta", theta),
        gain_epsilon=_as_float("gain.epsilon", _get(cfg, "gain.epsilon", "1e-6")),
        gain_exclude_current=_as_bool(
            "gain.exclude_current", _get(cfg, "gain.exclude_current", "false")
        ),
        warmup_fraction=_as_float(
            "run.warmup_fraction", _get(cfg, "run.warmup_fraction", "0.055")
        ),
        T_target=None if T_target is None else _as_int("run.T_target", T_target),
        seed=_as_int("run.seed", _get(cfg, "run.seed", "0")),
        snapshot_every=None if snap is None else _as_int("run.snapshot_every", snap),
    )


SWEEP_AXES = ("scale", "theta", "eta0")


def build_sweep(cfg: dict[str, str]) -> tuple[str, list[float]]:
    """Return (axis name, axis values) for a sweep config."""
    axis = _get(cfg, "sweep.axis", required=True)
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep.axis {axis!r}; expected one of {SWEEP_AXES}")
    values = _float_list("sweep.values", _get(cfg, "sweep.values", ""))
    if not values:
        raise ConfigError("sweep.values must be a non-empty list")
    return axis, values


def apply_sweep_point(cfg: dict[str, str], axis: str, value: float) -> dict[str, str]:
    """Copy of the flat config with one sweep axis pinned to ``value``."""
    out = {k: v for k, v in cfg.items() if not k.startswith("sweep.")}
    if axis == "scale":
        out["run.scale"] = str(int(value))
    elif axis == "theta":
        out["gain.theta"] = repr(float(value))
    elif axis == "eta0":
        out["schedule.eta0"] = repr(float(value))
    else:
        raise ConfigError(f"unknown sweep axis {axis!r}")
    return out
