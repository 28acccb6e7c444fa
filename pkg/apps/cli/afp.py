#!/usr/bin/env python3
"""
Approximate fixed point experiments with exact rational arithmetic.

Usage:
  python3 apps/cli/afp.py kkm --map square --epsilon 1/10
  python3 apps/cli/afp.py cesaro --map half-step --start 0 --steps 100 --csv out/half.csv
  python3 apps/cli/afp.py ex2 --start diffuse --steps 10 --support-bound 64
  python3 apps/cli/afp.py delta --op pipeline --map shift --region "mass>=1/2" --samples 2000
  python3 apps/cli/afp.py separate --mode span --stream basis --delta 9/10 --limit 12
  python3 apps/cli/afp.py replay --config out/report.json

The report JSON is printed on stdout (and written to --report); logs go to stderr.
Exit codes: 0 ok, 2 config, 3 domain escape, 4 depth exhausted, 1 other engine errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any


REPO_ROOT = Path(__file__).resolve().parents[2]
ENGINE_DIR = REPO_ROOT / "apps" / "engine"
if str(ENGINE_DIR) not in sys.path:
    sys.path.insert(0, str(ENGINE_DIR))

from errors import AfpError, ConfigError  # noqa: E402
from experiments import DELTA_OPS, ExperimentConfig, run, write_outputs  # noqa: E402
from run_log import configure_logging, default_level  # noqa: E402


# CLI flag -> params key; only flags actually given override the defaults
PARAM_FLAGS: dict[str, tuple[str, ...]] = {
    "kkm": ("map", "domain", "seminorm", "epsilon", "max_order", "resolution", "schedule"),
    "cesaro": ("map", "domain", "seminorm", "start", "steps", "partition", "check_steps", "affine_trials", "tolerance"),
    "ex2": ("start", "steps", "support_bound", "partition", "j_max"),
    "delta": (
        "op", "map", "p", "q", "x", "samples", "region", "delta", "M",
        "points", "scale", "trials", "perturb", "support_bound",
    ),
    "separate": ("mode", "stream", "dimension", "delta", "limit", "seminorm"),
}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--report", help="Write the report JSON to this path")
    parser.add_argument("--csv", help="Write the per-step series as CSV (cesaro, ex2)")
    parser.add_argument("--seed", type=int, help="Sampling seed (AFP_SEED overrides)")
    parser.add_argument("--log-level", default=None, help="Log level (default: AFP_LOG_LEVEL or WARNING)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Compute, certify and falsify approximate fixed points.")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    kkm = sub.add_parser("kkm", help="epsilon-fixed point by KKM subdivision search")
    kkm.add_argument("--map", help="Built-in map name or plugin:<path>")
    kkm.add_argument("--domain", help="unit-interval | unit-square | unit-triangle | <descriptor.json>")
    kkm.add_argument("--seminorm", help="l1 | linf | <descriptor.json>")
    kkm.add_argument("--epsilon", help="Target residual as p/q")
    kkm.add_argument("--max-order", dest="max_order", type=int, help="Largest subdivision order")
    kkm.add_argument("--resolution", type=int, help="Net sampling grid steps per axis")
    kkm.add_argument("--schedule", help="Comma-separated decreasing epsilons for a witness sequence")
    _add_common(kkm)

    ces = sub.add_parser("cesaro", help="Cesaro averages of an orbit")
    ces.add_argument("--map", help="Built-in map, ex2, ex1, baker or plugin:<path>")
    ces.add_argument("--domain", help="Domain for vector maps")
    ces.add_argument("--seminorm", help="Residual seminorm for vector maps")
    ces.add_argument("--start", help="Start point: p/q list, i:v list, diffuse, atom:n or a file")
    ces.add_argument("--steps", type=int, help="Number of averages k_max")
    ces.add_argument("--partition", help="dyadic | cantor (measure maps)")
    ces.add_argument("--check-steps", dest="check_steps", type=int, help="Steps for the exact identity check")
    ces.add_argument("--affine-trials", dest="affine_trials", type=int, help="Random affinity trials")
    ces.add_argument("--tolerance", help="Extract a cluster fixed point within this residual (vector maps)")
    _add_common(ces)

    ex2 = sub.add_parser("ex2", help="Fixed-point-free affine measure map and its certificate")
    ex2.add_argument("--start", help="diffuse | atom:n | <measure.json>")
    ex2.add_argument("--steps", type=int, help="Orbit steps")
    ex2.add_argument("--support-bound", dest="support_bound", type=int, help="Atoms considered: 1..N")
    ex2.add_argument("--partition", help="dyadic | cantor")
    ex2.add_argument("--j-max", dest="j_max", type=int, help="Forward indices to list")
    _add_common(ex2)

    delta = sub.add_parser("delta", help="Triangle fan geometry and displacement certification")
    delta.add_argument("--op", choices=DELTA_OPS)
    delta.add_argument("--map", help="shift | baker | plugin:<path>")
    delta.add_argument("--p", help="Point n:a:b")
    delta.add_argument("--q", help="Point n:a:b")
    delta.add_argument("--x", help="Sparse vector i:v,i:v")
    delta.add_argument("--samples", type=int)
    delta.add_argument("--region", help="all | mass>=p/q[,triangles=N]")
    delta.add_argument("--delta", help="Separation constant p/q")
    delta.add_argument("--M", dest="M", help="Upper norm bound p/q")
    delta.add_argument("--points", type=int, help="Number of chained basis points")
    delta.add_argument("--scale", help="Basis points are scale * e_n")
    delta.add_argument("--trials", type=int)
    delta.add_argument("--perturb", help="Push pipeline samples off the fan by up to this mass")
    delta.add_argument("--support-bound", dest="support_bound", type=int)
    _add_common(delta)

    sep = sub.add_parser("separate", help="Separated sequences and total boundedness probes")
    sep.add_argument("--mode", choices=("greedy", "span"))
    sep.add_argument("--stream", choices=("random", "basis"))
    sep.add_argument("--dimension", type=int)
    sep.add_argument("--delta", help="Separation p/q")
    sep.add_argument("--limit", type=int, help="Stream prefix length")
    sep.add_argument("--seminorm")
    _add_common(sep)

    replay = sub.add_parser("replay", help="Rerun an embedded or standalone config")
    replay.add_argument("--config", required=True, help="Config JSON or a previous report")
    _add_common(replay)
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    if args.subcommand == "replay":
        base = ExperimentConfig.load(args.config)
        return ExperimentConfig(
            base.subcommand,
            base.params,
            args.seed if args.seed is not None else base.seed,
            args.report or base.report,
            args.csv or base.csv,
        )
    params: dict[str, Any] = {}
    for key in PARAM_FLAGS[args.subcommand]:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    return ExperimentConfig(args.subcommand, params, args.seed, args.report, args.csv)


def _error_line(exc: AfpError) -> str:
    return json.dumps(
        {"error": type(exc).__name__, "message": str(exc), "exit_code": exc.exit_code},
        ensure_ascii=False,
    )


def run_cli(args: argparse.Namespace) -> int:
    try:
        configure_logging(args.log_level or default_level())
    except ValueError as exc:
        print(_error_line(ConfigError(str(exc))), file=sys.stderr)
        return ConfigError.exit_code
    try:
        cfg = config_from_args(args)
        report = run(cfg)
        write_outputs(report, cfg.report, cfg.csv)
    except AfpError as exc:
        print(_error_line(exc), file=sys.stderr)
        return exc.exit_code
    print(json.dumps(report.to_json(), ensure_ascii=False, sort_keys=True))
    return 0


def main() -> int:
    parser = build_parser()
    args = parser.parse_args()
    return run_cli(args)


if __name__ == "__main__":
    raise SystemExit(main())
