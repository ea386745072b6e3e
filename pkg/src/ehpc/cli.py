"""Command-line entry point for ehpc."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any, TextIO

from .commands import (
    RunRecord,
    format_oracle_report,
    format_solve_report,
    format_verify_report,
    run_oracle,
    run_simulation,
    run_sweep,
    run_verification,
    solve_scenario,
)
from .config import RunConfig, load_config
from .constants import (
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_VERIFY_FAILED,
    RUN_RECORD_COLUMNS,
)
from .exceptions import EhpcError, NonConvergenceError, ScenarioError
from .scenario import load_scenario_file

logger = logging.getLogger(__name__)

# Global run configuration
_config: RunConfig | None = None


def get_config() -> RunConfig:
    """Get the global run configuration, loading ehpcconfig.json on first use."""
    global _config
    if _config is None:
        _config = load_config()
    return _config


def parse_values(tokens: Sequence[str]) -> list[float]:
    """Flatten space- and comma-separated sweep values."""
    values = []
    for token in tokens:
        for part in token.split(","):
            part = part.strip()
            if part:
                try:
                    values.append(float(part))
                except ValueError:
                    raise ValueError(f"invalid sweep value '{part}'") from None
    return values


def write_records(records: Sequence[RunRecord], out: str | None = None) -> None:
    """Write run records as CSV to stdout, or append them to ``out``.

    The header is written to stdout every time and to a file only when the
    file is new or empty.
    """
    if out is None:
        _write_csv(sys.stdout, records, header=True)
        return
    path = Path(out)
    header = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as f:
        _write_csv(f, records, header=header)


def _write_csv(stream: TextIO, records: Sequence[RunRecord], header: bool) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    if header:
        writer.writerow(RUN_RECORD_COLUMNS)
    for record in records:
        writer.writerow(record.as_row())


def _print_json(document: dict[str, Any]) -> None:
    print(json.dumps(document, indent=2))


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with one subcommand per command."""
    parser = argparse.ArgumentParser(
        prog="ehpc",
        description="Online power control for block i.i.d. energy harvesting.",
    )
    parser.add_argument(
        "--config", default=None, help="Configuration file (default: ehpcconfig.json)"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    def add_scenario(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("scenario", help="Scenario JSON file")
        sub.add_argument("--threads", type=int, default=None, help="Worker processes")

    solve = subparsers.add_parser("solve", help="Solve for E_c, q and the bounds")
    add_scenario(solve)
    solve.add_argument("--json", action="store_true", help="Print JSON only")

    simulate = subparsers.add_parser("simulate", help="Monte Carlo throughput")
    add_scenario(simulate)
    simulate.add_argument("--policy", default="p1", help="Policy name or alias")
    simulate.add_argument("--blocks", type=int, default=None)
    simulate.add_argument("--reps", type=int, default=None)
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    simulate.add_argument("--out", default=None, help="Append CSV rows to this file")
    simulate.add_argument("--timing", action="store_true", help="Record wall time")

    oracle = subparsers.add_parser("oracle", help="Value-iteration gain")
    add_scenario(oracle)
    oracle.add_argument("--grid", type=int, default=None, help="Battery grid points")
    oracle.add_argument("--actions", type=int, default=None, help="Action grid points")
    oracle.add_argument("--tol", type=float, default=None, help="Span tolerance")
    oracle.add_argument("--max-iter", type=int, default=None, dest="max_iter")
    oracle.add_argument(
        "--no-slack", action="store_true", help="Skip the doubled-grid slack estimate"
    )
    oracle.add_argument("--json", action="store_true", help="Print JSON only")

    verify = subparsers.add_parser("verify", help="Run the verification suite")
    add_scenario(verify)
    verify.add_argument("--perturb-q", type=float, default=0.0, dest="perturb_q")
    verify.add_argument("--blocks", type=int, default=None)
    verify.add_argument("--reps", type=int, default=None)
    verify.add_argument("--seed", type=int, default=None)
    verify.add_argument("--grid", type=int, default=None)
    verify.add_argument("--json", action="store_true", help="Print JSON only")

    sweep = subparsers.add_parser("sweep", help="Sweep B or T")
    add_scenario(sweep)
    sweep.add_argument("--param", choices=("B", "T"), required=True)
    sweep.add_argument("--values", nargs="+", required=True)
    sweep.add_argument("--policy", default=None, help="Also simulate this policy")
    sweep.add_argument("--blocks", type=int, default=None)
    sweep.add_argument("--reps", type=int, default=None)
    sweep.add_argument("--seed", type=int, default=None)
    sweep.add_argument("--burn-in", type=int, default=None, dest="burn_in")
    sweep.add_argument("--out", default=None, help="Append CSV rows to this file")
    sweep.add_argument("--timing", action="store_true", help="Record wall time")

    return parser


def _configure(args: argparse.Namespace) -> RunConfig:
    """Apply command-line overrides over the configuration file."""
    global _config
    config = load_config(args.config).override(threads=args.threads)
    if args.command in ("simulate", "sweep"):
        config = config.override(
            blocks=args.blocks, reps=args.reps, seed=args.seed, burn_in=args.burn_in
        )
    elif args.command == "oracle":
        config = config.override(
            grid=args.grid,
            n_action=args.actions,
            vi_tol=args.tol,
            vi_max_iter=args.max_iter,
        )
    elif args.command == "verify":
        config = config.override(
            verify_blocks=args.blocks,
            verify_reps=args.reps,
            seed=args.seed,
            grid=args.grid,
        )
    _config = config
    return config


def run_command(args: argparse.Namespace) -> int:
    """Dispatch a parsed command line and return its exit code."""
    config = _configure(args)
    scenario = load_scenario_file(args.scenario)

    if args.command == "solve":
        result = solve_scenario(scenario)
        if not args.json:
            print(format_solve_report(result))
        _print_json(result)
        return EXIT_OK

    if args.command == "simulate":
        outcome = run_simulation(scenario, args.policy, config, timing=args.timing)
        write_records([outcome["record"]], args.out)
        return EXIT_OK

    if args.command == "oracle":
        result = run_oracle(scenario, config, with_slack=not args.no_slack)
        if not args.json:
            print(format_oracle_report(result))
        _print_json(result)
        return EXIT_OK

    if args.command == "verify":
        result = run_verification(scenario, config, perturb_q=args.perturb_q)
        if args.json:
            _print_json(result)
        else:
            print(format_verify_report(result))
        return EXIT_OK if result["passed"] else EXIT_VERIFY_FAILED

    values = parse_values(args.values)
    sweep = run_sweep(
        scenario, args.param, values, args.policy, config, timing=args.timing
    )
    write_records(sweep["records"], args.out)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Parse arguments, run one command and return the process exit code."""
    logging.basicConfig(
        level=os.environ.get("LOG_LEVEL", "WARNING"),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_INPUT_ERROR

    try:
        return run_command(args)
    except NonConvergenceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERIFY_FAILED
    except (ScenarioError, OSError, json.JSONDecodeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except EhpcError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
