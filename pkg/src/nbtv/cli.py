"""Command-line interface.

Subcommands:

* ``simulate``     -- phantom -> blur -> noisy counts, written as CSV/PGM.
* ``reconstruct``  -- solve one reconstruction from observed counts.
* ``experiment1``  -- dispersion x exponent x TV-kind sweep (nb model).
* ``experiment2``  -- nb vs. Poisson across five penalties.
* ``metrics``      -- relative l2 error between two CSV images.

Every subcommand accepts ``--config FILE`` (flat ``key = value`` text; see
README for the keys), ``--seed N``, ``--out-dir DIR``, and repeatable
``--set key=value`` overrides.  Exit codes: 0 success, 1 configuration or
usage error, 2 runtime failure.

All written outputs are byte-reproducible for a fixed configuration and
seed; wall-clock timing is therefore omitted from the trace CSV written by
``reconstruct`` (the column stays in the header, its values are empty).
"""

from __future__ import annotations

import argparse
import os
import sys

from .blur import blur_apply
from .config import config_digest, get_float, get_str, read_config_file
from .errors import ConfigError, NbtvError
from .image import read_image_csv, rmse, write_image_csv, write_image_pgm
from .likelihoods import DataFit
from .noise import NoiseModel, make_rng, sample_counts
from .regularizers import Penalty
from .solver import reconstruct as solve_reconstruct
from .experiments import (
    _LABEL_INFO,
    ExperimentConfig,
    PENALTY_LABELS,
    load_truth,
    run_experiment1,
    run_experiment2,
)

# Keys consumed by simulate/reconstruct on top of the experiment keys.
_TASK_KEYS = ("r", "model", "penalty", "penalty_p", "tau", "counts", "truth")


class _UsageError(ConfigError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="nbtv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--seed", type=int, help="override the base seed")
        p.add_argument("--out-dir", help="override the output directory")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override any config key (repeatable)",
        )

    common(sub.add_parser("simulate", help="write truth, expected, and noisy counts"))
    common(sub.add_parser("reconstruct", help="reconstruct from observed counts"))
    common(sub.add_parser("experiment1", help="run the p-sweep experiment"))
    common(sub.add_parser("experiment2", help="run the model/penalty benchmark"))

    metrics = sub.add_parser("metrics", help="relative l2 error between two images")
    metrics.add_argument("--truth", required=True, help="truth image (float CSV)")
    metrics.add_argument("--estimate", required=True, help="estimate image (float CSV)")
    return parser


def _load_mapping(args) -> dict:
    mapping: dict = {}
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"--config: no such file: {args.config}")
        mapping = read_config_file(args.config)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        mapping[key.strip()] = value.strip()
    if args.seed is not None:
        mapping["seed"] = str(args.seed)
    if args.out_dir is not None:
        mapping["out_dir"] = str(args.out_dir)
    return mapping


def _split_task_keys(mapping: dict) -> tuple[dict, dict]:
    task = {k: v for k, v in mapping.items() if k in _TASK_KEYS}
    rest = {k: v for k, v in mapping.items() if k not in _TASK_KEYS}
    return task, rest


def _cmd_simulate(mapping: dict) -> int:
    task, rest = _split_task_keys(mapping)
    cfg = ExperimentConfig.from_mapping(rest)
    r_values = [get_float(task, "r", 0.0)] if "r" in task else list(cfg.r_list)
    out = os.path.join(cfg.out_dir, "simulate")
    os.makedirs(out, exist_ok=True)
    truth = load_truth(cfg)
    expected = blur_apply(cfg.blur, truth)
    write_image_csv(os.path.join(out, "truth.csv"), truth)
    write_image_pgm(os.path.join(out, "truth.pgm"), truth)
    write_image_csv(os.path.join(out, "expected.csv"), expected)
    for r in r_values:
        counts = sample_counts(
            NoiseModel.negative_binomial(r), expected, make_rng(cfg.seed)
        )
        tag = f"{r:g}"
        write_image_csv(os.path.join(out, f"counts_r{tag}.csv"), counts)
        write_image_pgm(os.path.join(out, f"counts_r{tag}.pgm"), counts)
    print(f"wrote simulation to {out}")
    return 0


def _task_penalty(task: dict) -> Penalty:
    label = get_str(task, "penalty", "lp-tv-a")
    if label not in PENALTY_LABELS:
        raise ConfigError(
            f"key 'penalty': unknown value {label!r}; known: {', '.join(PENALTY_LABELS)}"
        )
    kind, p_free = _LABEL_INFO[label]
    p = get_float(task, "penalty_p", 0.7) if p_free else 1.0
    tau = get_float(task, "tau", 1.0)
    return Penalty(kind=kind, p=p, tau=tau)


def _cmd_reconstruct(mapping: dict) -> int:
    task, rest = _split_task_keys(mapping)
    cfg = ExperimentConfig.from_mapping(rest)
    r = get_float(task, "r", float(cfg.r_list[0]))
    model_name = get_str(task, "model", "nb")
    if model_name == "nb":
        model = NoiseModel.negative_binomial(r)
    elif model_name == "poisson":
        model = NoiseModel.poisson()
    else:
        raise ConfigError(f"key 'model': expected 'nb' or 'poisson', got {model_name!r}")

    truth = None
    if "truth" in task:
        truth = read_image_csv(task["truth"])
    if "counts" in task:
        counts = read_image_csv(task["counts"])
    else:
        # Simulate the observation inline from the configured phantom.
        if truth is None:
            truth = load_truth(cfg)
        expected = blur_apply(cfg.blur, truth)
        counts = sample_counts(
            NoiseModel.negative_binomial(r), expected, make_rng(cfg.seed)
        )

    fit = DataFit(model=model, counts=counts, operator=cfg.blur)
    penalty = _task_penalty(task)
    recon, trace = solve_reconstruct(fit, penalty, cfg=cfg.solver, truth=truth)

    out = os.path.join(cfg.out_dir, "reconstruct")
    os.makedirs(out, exist_ok=True)
    write_image_csv(os.path.join(out, "recon.csv"), recon)
    write_image_pgm(os.path.join(out, "recon.pgm"), recon)
    trace.to_csv(os.path.join(out, "trace.csv"), include_seconds=False)
    digest = config_digest({**cfg.effective_mapping(), **task})
    print(f"wrote reconstruction to {out} (config {digest})")
    if trace.rmse[-1] is not None:
        print(f"rmse = {trace.rmse[-1]!r}")
    return 0


def _cmd_experiment(mapping: dict, which: int) -> int:
    cfg = ExperimentConfig.from_mapping(mapping)
    rows = run_experiment1(cfg) if which == 1 else run_experiment2(cfg)
    bad = [row for row in rows if row["status"] != "ok"]
    summary = os.path.join(cfg.out_dir, f"experiment{which}", "summary.csv")
    print(f"wrote {len(rows)} cells to {summary}")
    for row in bad:
        print(f"cell {row['cell']} failed: {row['status']}", file=sys.stderr)
    return 2 if bad else 0


def _cmd_metrics(args) -> int:
    value = rmse(read_image_csv(args.estimate), read_image_csv(args.truth))
    print(f"rmse = {value!r}")
    print(f"rmse_percent = {100.0 * value:.4f}")
    return 0


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise _UsageError(parser.format_usage())
        if args.command == "metrics":
            return _cmd_metrics(args)
        mapping = _load_mapping(args)
        if args.command == "simulate":
            return _cmd_simulate(mapping)
        if args.command == "reconstruct":
            return _cmd_reconstruct(mapping)
        if args.command == "experiment1":
            return _cmd_experiment(mapping, 1)
        return _cmd_experiment(mapping, 2)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except NbtvError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())
