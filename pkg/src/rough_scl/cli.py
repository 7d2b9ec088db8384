"""Command-line entry point.

One subcommand per experiment plus `suite`; every subcommand accepts
`--config <file>` (flat key = value text), `--seed`, `--out`, and `--workers`.
The default output root is ./runs, overridable by the ROUGH_SCL_OUT variable.
"""
from __future__ import annotations

import argparse
import sys

from .config import load_config
from .harness import DEFAULT_SUITE, EXPERIMENTS, execute, run_suite


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--seed", type=int, help="override the path seed")
    p.add_argument("--out", help="output root directory (default: runs/ or ROUGH_SCL_OUT)")
    p.add_argument("--workers", type=int, default=2, help="concurrent experiments in a suite")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rough-scl",
        description="Finite-volume laboratory for conservation laws driven by rough time signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run the solver on one datum/path and dump snapshots",
        "contraction": "L1 distance of two data under one path, must be nonincreasing",
        "path-stability": "error scaling under sine perturbations of the driver",
        "refine": "Cauchy gaps under dyadic path refinement",
        "kinetic-check": "defect-measure extraction, sign/mass bounds, L1 identity",
        "dissipative-check": "monotonicity against local smooth solutions",
        "semilinear-demo": "transform-vs-direct shock mismatch for a semilinear law",
    }
    for name in EXPERIMENTS:
        _add_common(sub.add_parser(name, help=helps[name]))
    suite = sub.add_parser("suite", help="run several experiments concurrently")
    suite.add_argument("experiments", nargs="*", help=f"names (default: {' '.join(DEFAULT_SUITE)})")
    _add_common(suite)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed}
    if args.command != "suite":
        overrides["experiment"] = args.command
    try:
        cfg = load_config(args.config, overrides)
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "suite":
        names = args.experiments or list(DEFAULT_SUITE)
        unknown = [n for n in names if n not in EXPERIMENTS]
        if unknown:
            print(f"unknown experiments: {unknown}", file=sys.stderr)
            return 2
        suite_dir, summary = run_suite(names, cfg, args.out, args.workers)
        for name in names:
            res = summary["experiments"][name]
            print(f"{name}: {'PASS' if res['pass'] else 'FAIL'}  ({res['run_dir']})")
        print(f"suite: {'PASS' if summary['pass'] else 'FAIL'}  ({suite_dir})")
        return 0 if summary["pass"] else 1
    run_dir, report = execute(args.command, cfg, args.out)
    ok = report.get("pass")
    print(f"{args.command}: {'PASS' if ok else 'FAIL'}  ({run_dir})")
    for key in sorted(report):
        if key in ("pass",) or isinstance(report[key], (list, dict)):
            continue
        print(f"  {key} = {report[key]}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
