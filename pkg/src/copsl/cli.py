"""Command-line entry point: run, ablate, front, hv, defaults.

Exit codes: 0 on full success, 1 when at least one training run failed, 2 on
configuration or usage errors. All artifacts are written atomically.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .errors import CheckpointError, ConfigurationError, CopslError, InputError, UnsupportedError
from .metrics import hv_2d, hv_3d, read_front_csv, write_front_csv
from .model import load_checkpoint
from .problems import builtin_suite, suite_from_names
from .sampling import uniform_preference_grid
from .trainer import (
    CONFIG_VERSION,
    RunConfig,
    evaluate_model,
    run_ablation,
    run_batch,
    write_ablation_csv,
)

OUT_DIR_ENV = "COPSL_OUT_DIR"


def load_config(path: str) -> RunConfig:
    """Parse a JSON config file with strict key checking."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    version = data.pop("config_version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigurationError(f"unsupported config_version {version!r}, expected {CONFIG_VERSION}")
    return RunConfig.from_dict(data)


def default_config_json() -> str:
    data = {"config_version": CONFIG_VERSION}
    data.update(RunConfig().to_dict())
    return json.dumps(data, indent=2, sort_keys=True)


def _out_dir(args) -> str:
    if args.out:
        return args.out
    return os.environ.get(OUT_DIR_ENV, "copsl-out")


def cmd_run(args) -> int:
    config = load_config(args.config)
    seeds = args.seed if args.seed else [config.seed]
    out_dir = _out_dir(args)
    os.makedirs(out_dir, exist_ok=True)
    summaries = run_batch([config], seeds, out_dir=out_dir)
    summary = summaries[0]
    for failure in summary["failures"]:
        print(f"seed {failure['seed']} failed: {failure['error']}", file=sys.stderr)
    if summary["records"]:
        names = summary["mop_names"]
        means = summary["mean_final_hv"]
        stds = summary["std_final_hv"]
        for name, mean, std in zip(names, means, stds):
            print(f"{name}: final HV {mean:.6g} +- {std:.3g} over {len(summary['records'])} run(s)")
    return 1 if summary["failures"] else 0


def cmd_ablate(args) -> int:
    config = load_config(args.config)
    seeds = args.seed if args.seed else [config.seed]
    out_dir = _out_dir(args)
    os.makedirs(out_dir, exist_ok=True)
    rows, failures = run_ablation(config, seeds=seeds)
    table_path = os.path.join(out_dir, "ablation.csv")
    write_ablation_csv(rows, table_path)
    for failure in failures:
        print(
            f"shared_depth {failure['shared_depth']} seed {failure['seed']} failed: {failure['error']}",
            file=sys.stderr,
        )
    print(f"wrote {len(rows)} rows to {table_path}")
    return 1 if failures else 0


def cmd_front(args) -> int:
    model, metadata = load_checkpoint(args.checkpoint)
    suite_spec = args.suite if args.suite else metadata.get("suite")
    if suite_spec is None:
        raise ConfigurationError(
            "checkpoint carries no suite metadata; pass --suite explicitly"
        )
    if isinstance(suite_spec, str) and "," in suite_spec:
        suite_spec = [s.strip() for s in suite_spec.split(",")]
    suite = builtin_suite(suite_spec) if isinstance(suite_spec, str) else suite_from_names(suite_spec)
    if suite.num_objectives != model.arch.num_objectives:
        raise ConfigurationError(
            f"suite has {suite.num_objectives} objectives but the model expects "
            f"{model.arch.num_objectives}"
        )
    grid = uniform_preference_grid(suite.num_objectives, args.grid)
    report = evaluate_model(model, suite, grid)
    stem, ext = os.path.splitext(args.out)
    ext = ext or ".csv"
    written = []
    for mop, front in zip(suite.problems, report.fronts):
        path = args.out if suite.num_mops == 1 else f"{stem}_{mop.name}{ext}"
        write_front_csv(path, front, mop.reference_point)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_hv(args) -> int:
    points, embedded_ref = read_front_csv(args.front)
    if args.ref:
        try:
            reference = np.array([float(v) for v in args.ref.split(",")])
        except ValueError as exc:
            raise ConfigurationError(f"cannot parse --ref {args.ref!r}: {exc}") from exc
    else:
        reference = embedded_ref
    if reference.shape[0] != points.shape[1]:
        raise ConfigurationError(
            f"reference point has {reference.shape[0]} components but the front has "
            f"{points.shape[1]} objectives"
        )
    if points.shape[1] == 2:
        value = hv_2d(points, reference)
    elif points.shape[1] == 3:
        value = hv_3d(points, reference)
    else:
        raise ConfigurationError("hypervolume is implemented for 2 or 3 objectives")
    print(f"{value:.12g}")
    return 0


def cmd_defaults(args) -> int:
    print(default_config_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="copsl",
        description="Train preference-conditioned models for multiple multi-objective problems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train with a config file across one or more seeds")
    run.add_argument("--config", required=True, help="path to a JSON run config")
    run.add_argument("--seed", type=int, action="append", help="seed (repeatable)")
    run.add_argument("--out", help=f"output directory (default ${OUT_DIR_ENV} or ./copsl-out)")
    run.set_defaults(func=cmd_run)

    ablate = sub.add_parser("ablate", help="sweep every shared-depth variant")
    ablate.add_argument("--config", required=True)
    ablate.add_argument("--seed", type=int, action="append")
    ablate.add_argument("--out")
    ablate.set_defaults(func=cmd_ablate)

    front = sub.add_parser("front", help="export per-problem fronts from a checkpoint")
    front.add_argument("--checkpoint", required=True)
    front.add_argument("--grid", type=int, default=100, help="preference grid size")
    front.add_argument("--out", required=True, help="output CSV (suffixed per problem)")
    front.add_argument("--suite", help="suite name or comma-separated problem names")
    front.set_defaults(func=cmd_front)

    hv = sub.add_parser("hv", help="hypervolume of a front CSV")
    hv.add_argument("--front", required=True)
    hv.add_argument("--ref", help='reference point "a,b" or "a,b,c" (default: file header)')
    hv.set_defaults(func=cmd_hv)

    defaults = sub.add_parser("defaults", help="print the default config as JSON")
    defaults.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, InputError, UnsupportedError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CopslError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
