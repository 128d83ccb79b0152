"""Command-line front end.

    scorekde <subcommand> --config <path-or-preset> [--seed S] [--out DIR] [--threads K]

Subcommands: score-error, generate, kde-compare, bounds-check. ``--config``
accepts a TOML file path or one of the shipped presets (figure2, figure3,
kde-compare, bounds). Exit codes: 0 success (all requested checks pass),
1 check failure, 2 config or IO error.
"""

from __future__ import annotations

import argparse
import os
import sys

from .dataio import DatasetFormatError
from .experiments import (
    KINDS,
    ConfigError,
    load_config,
    preset_names,
    run_bounds_check,
    run_generate,
    run_kde_compare,
    run_score_error,
)

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scorekde",
        description=(
            "Diffusion-sampling experiments: score-error curves, backward-SDE "
            "generation, KDE comparison, and distance-bound checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    help_for = {
        "score-error": "score approximation error against training-set size",
        "generate": "backward-SDE sampling with exact and dataset-optimal scores",
        "kde-compare": "two-sample test of backward sampling against the matched KDE",
        "bounds-check": "pass/fail table of the closed-form distance bounds",
    }
    for kind in KINDS:
        cmd = sub.add_parser(kind, help=help_for[kind])
        cmd.add_argument(
            "--config",
            required=True,
            help=f"TOML config path or preset name ({', '.join(preset_names())})",
        )
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--out", default=None, help="override the output directory")
        cmd.add_argument(
            "--threads",
            type=int,
            default=None,
            help="replicate-level worker count (default: config value or number of cores)",
        )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    threads = args.threads
    if threads is None:
        threads = os.cpu_count() or 1
    try:
        config = load_config(args.config, seed=args.seed, out=args.out, threads=threads)
        if config.kind != args.command:
            raise ConfigError(
                f"config is for kind {config.kind!r} but the subcommand is {args.command!r}"
            )
        if config.kind == "score-error":
            curve = run_score_error(config)
            if curve.fitted_slope is not None:
                print(f"score-error: slope = {curve.fitted_slope:.4f}")
            else:
                print("score-error: fewer than 3 sample sizes, slope fit skipped")
            return 0
        if config.kind == "generate":
            paths = run_generate(config)
            for name in sorted(paths):
                print(f"generate: wrote {paths[name]}")
            return 0
        if config.kind == "kde-compare":
            report = run_kde_compare(config)
            verdict = "reject" if report["reject"] else "no rejection"
            print(
                f"kde-compare: statistic = {report['energy_statistic']:.6g}, "
                f"p = {report['p_value']:.4f} ({verdict} at alpha = {report['alpha']})"
            )
            return 1 if report["reject"] else 0
        rows, all_passed = run_bounds_check(config)
        for row in rows:
            status = "pass" if row.passed else "FAIL"
            print(
                f"bounds-check: {row.bound_id}: lhs = {row.lhs:.6g}, "
                f"rhs = {row.rhs:.6g} ({status})"
            )
        return 0 if all_passed else 1
    except (ConfigError, DatasetFormatError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
