"""Command-line entry point: one subcommand per pipeline stage plus ``pipeline`` and ``sweep``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ExperimentConfig
from .pipeline import STAGES, StageError, run_pipeline, run_stage, sweep
from .synthetic import SyntheticSpec, write_dataset

log = logging.getLogger("trust_siot")


def _parse_set(items):
    out = {}
    for item in items or ():
        if "=" not in item:
            raise argparse.ArgumentTypeError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="key = value config file")
    common.add_argument("-s", "--set", action="append", metavar="KEY=VALUE", help="override a config key")
    common.add_argument("-o", "--output", help="run directory (config key 'output')")
    common.add_argument("-m", "--manifest", help="dataset manifest (config key 'manifest')")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="trust-siot", description="Social IoT trust pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help=f"run the {stage} stage")
    sub.add_parser("pipeline", parents=[common], help="run every stage in order")
    p = sub.add_parser("sweep", parents=[common], help="metrics across train fractions or interaction buckets")
    p.add_argument("--axis", choices=("train_fraction", "interactions"))
    p.add_argument("--values", help="comma-separated sweep values")
    p = sub.add_parser("synth", help="write a planted-trust toy dataset")
    p.add_argument("out", help="output directory")
    p.add_argument("--objects", type=int, default=SyntheticSpec.n_objects)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "synth":
        manifest = write_dataset(args.out, SyntheticSpec(n_objects=args.objects), args.seed)
        print(manifest)
        return 0

    try:
        overrides = _parse_set(args.set)
        if args.output:
            overrides["output"] = args.output
        if args.manifest:
            overrides["manifest"] = args.manifest
        cfg = ExperimentConfig.load(args.config, overrides)
    except (argparse.ArgumentTypeError, KeyError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "pipeline":
            report = run_pipeline(cfg)
        elif args.command == "sweep":
            values = [float(v) for v in args.values.split(",")] if args.values else None
            for row in sweep(cfg, args.axis, values):
                print(",".join(row))
            return 0
        else:
            report = run_stage(cfg, args.command)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if report is not None:
        print(f"f1={report.f1_micro:.4f} mae={report.mae:.4f} mse={report.mse:.4f} n_test={report.n_test}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
