"""Command-line experiment runner.

Subcommands:

* ``train``        -- run one config over a seed list, write per-seed
                      trace CSVs and a mean/std summary.
* ``sweep``        -- run ``train`` per point of a one-dimensional sweep
                      axis and emit a matrix CSV.
* ``verify``       -- run a named verification suite; exit 0 iff all
                      checks pass.
* ``gain-compare`` -- log the online gain estimate next to offline and
                      exact values computed at periodic snapshots.

Exit codes: 0 success/PASS, 1 FAIL, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import math
import os
import sys
import tempfile

import numpy as np

from . import config as config_mod, suites
from .engine import TrainConfig, run
from .errors import ConfigError
from .gain import analytic_gain, oracle_gain
from . import rng as rng_mod

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _seed_list(args) -> list[int]:
    if args.seed_list:
        try:
            return [int(s) for s in args.seed_list.split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"bad --seed-list {args.seed_list!r}") from None
    return list(range(args.seeds))


def _run_seeds(cfg: TrainConfig, seeds: list[int], threads: int):
    from dataclasses import replace

    configs = [replace(cfg, seed=s) for s in seeds]
    if threads <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, configs))


def _mean_std(values) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=1)) if len(arr) > 1 else 0.0


def _train_summary(traces, flat_cfg) -> str:
    diverged = [t for t in traces if t.diverged]
    lines = [f"seeds = {','.join(str(t.seed) for t in traces)}"]
    clean = [t for t in traces if not t.diverged]
    if not clean:
        lines.append("final_F = N/A")
        lines.append("training_loss = N/A")
    else:
        # Validation metric at desk scale is the objective itself.
        mean_F, std_F = _mean_std([t.final_F for t in clean])
        mean_loss, std_loss = _mean_std([t.F.mean() for t in clean])
        lines.append(f"final_F = {mean_F:.17g}")
        lines.append(f"final_F_std = {std_F:.17g}")
        lines.append(f"training_loss = {mean_loss:.17g}")
        lines.append(f"training_loss_std = {std_loss:.17g}")
    mean_T, std_T = _mean_std([t.total_iterations for t in traces])
    lines.append(f"total_iterations = {mean_T:.17g}")
    lines.append(f"total_iterations_std = {std_T:.17g}")
    lines.append(f"diverged_seeds = {len(diverged)}")
    for key, value in flat_cfg.items():
        lines.append(f"config.{key} = {value}")
    return "\n".join(lines) + "\n"


def _load_flat(args) -> dict[str, str]:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    return config_mod.load_config(args.config)


def cmd_train(args) -> int:
    flat = _load_flat(args)
    cfg = config_mod.build_train_config(flat)
    seeds = _seed_list(args)
    if not seeds:
        raise ConfigError("empty seed list")
    os.makedirs(args.out, exist_ok=True)
    traces = _run_seeds(cfg, seeds, args.threads)
    for trace in traces:
        trace.to_csv(os.path.join(args.out, f"trace_seed{trace.seed}.csv"))
    _atomic_write(os.path.join(args.out, "summary.txt"), _train_summary(traces, flat))
    return EXIT_OK


def cmd_sweep(args) -> int:
    flat = _load_flat(args)
    axis, values = config_mod.build_sweep(flat)
    seeds = _seed_list(args)
    if not seeds:
        raise ConfigError("empty seed list")
    os.makedirs(args.out, exist_ok=True)
    rows = []
    for value in values:
        point = config_mod.apply_sweep_point(flat, axis, value)
        cfg = config_mod.build_train_config(point)
        traces = _run_seeds(cfg, seeds, args.threads)
        point_dir = os.path.join(args.out, f"{axis}_{value:g}")
        os.makedirs(point_dir, exist_ok=True)
        for trace in traces:
            trace.to_csv(os.path.join(point_dir, f"trace_seed{trace.seed}.csv"))
        clean = [t for t in traces if not t.diverged]
        mean_F = float(np.mean([t.final_F for t in clean])) if clean else math.nan
        mean_T = float(np.mean([t.total_iterations for t in traces]))
        rows.append((value, mean_F, mean_T, len(traces) - len(clean)))
    lines = [f"{axis},final_F,total_iterations,diverged_seeds"]
    for value, mean_F, mean_T, n_div in rows:
        F_txt = "N/A" if math.isnan(mean_F) else f"{mean_F:.17g}"
        lines.append(f"{value:.17g},{F_txt},{mean_T:.17g},{n_div}")
    _atomic_write(os.path.join(args.out, "sweep.csv"), "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = suites.run_suite(args.suite)
    report = "\n".join(r.line() for r in results) + "\n"
    sys.stdout.write(report)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(os.path.join(args.out, "verify.txt"), report)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def cmd_gain_compare(args) -> int:
    from dataclasses import replace

    flat = _load_flat(args)
    cfg = config_mod.build_train_config(flat)
    if cfg.algorithm != "adascale":
        raise ConfigError("gain-compare needs an adascale config")
    cfg = replace(cfg, snapshot_every=args.every)
    seeds = _seed_list(args)
    if not seeds:
        raise ConfigError("empty seed list")
    os.makedirs(args.out, exist_ok=True)
    obj = cfg.objective
    for seed in seeds:
        trace = run(replace(cfg, seed=seed))
        lines = [f"# seed = {seed}", "t,online_r,oracle_r,analytic_r"]
        for t, w in trace.snapshots:
            scale = int(trace.S[t])
            offline = oracle_gain(
                obj, w, scale, n_batches=1000,
                rng=rng_mod.stream(seed, rng_mod.LANE_ORACLE, t, 0),
            )
            try:
                exact = f"{analytic_gain(obj, w, scale):.17g}"
            except Exception:
                exact = "N/A"
            lines.append(f"{t},{trace.r[t]:.17g},{offline:.17g},{exact}")
        _atomic_write(
            os.path.join(args.out, f"gain_compare_seed{seed}.csv"),
            "\n".join(lines) + "\n",
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adascale-lab",
        description="Desk-scale laboratory for gain-scaled large-batch SGD.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_config=True):
        if needs_config:
            p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seeds", type=int, default=1, help="run seeds 0..N-1")
        p.add_argument("--seed-list", help="comma-separated explicit seeds")
        p.add_argument("--threads", type=int, default=1)

    common(sub.add_parser("train", help="run one config over seeds"))
    common(sub.add_parser("sweep", help="run a one-axis parameter sweep"))

    verify = sub.add_parser("verify", help="run a verification suite")
    verify.add_argument(
        "--suite", default="all", choices=sorted(suites.SUITES),
        help="suite name",
    )
    verify.add_argument("--out", default=None, help="optional report directory")

    compare = sub.add_parser(
        "gain-compare", help="compare online, offline, and exact gain estimates"
    )
    common(compare)
    compare.add_argument(
        "--every", type=int, default=50, help="snapshot interval in iterations"
    )
    return parser


COMMANDS = {
    "train": cmd_train,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "gain-compare": cmd_gain_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE


def entry_point() -> None:
    sys.exit(main())
