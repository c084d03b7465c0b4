"""Command-line entry point.

Subcommands mirror the pipeline stages: featurize, frontier, explain,
evaluate, select, report, plus ``run`` for the full chain.  Exit codes:
0 success, 2 configuration error, 3 stage failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .pipeline import ConfigError, ExperimentConfig, StageError, run_experiment, run_stage

_OVERRIDES = {
    "budget": ("--budget", int, "frontier solver budget"),
    "m": ("--m", int, "sample-rationale count (1 positive + m-1 negatives)"),
    "variant_seed": ("--seed", int, "negative-rationale sampling seed"),
    "explainer": ("--explainer", str, "lime or shapley"),
    "subset_size": ("--subset", int, "explanation subset size"),
    "out_dir": ("--out", str, "run output directory"),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rationale-frontier",
        description="Trade off classifier performance against explanation "
        "plausibility with contrastive rationale training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "featurize", "frontier", "explain", "evaluate",
                 "select", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config JSON")
        for field, (flag, typ, help_text) in _OVERRIDES.items():
            p.add_argument(flag, dest=field, type=typ, default=None, help=help_text)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
        overrides = {
            field: getattr(args, field)
            for field in _OVERRIDES
            if getattr(args, field) is not None
        }
        if overrides:
            cfg = dataclasses.replace(cfg, **overrides)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "run":
            artifact = run_experiment(cfg)
            print(f"run complete: {artifact.directory}")
        else:
            run_stage(cfg, args.command)
            print(f"stage '{args.command}' complete: {cfg.out_dir}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
