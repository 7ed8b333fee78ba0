"""Command-line entry point.

Subcommands::

    payoffnash run CONFIG [--seed N] [--runs N] [--horizon N] [--out PATH] [--workers N]
    payoffnash rates CSV [--tail-fraction F]
    payoffnash diagnose [CONFIG] [--game NAME]
    payoffnash solve-ne [CONFIG] [--game NAME] [--tol TOL]

Exit status is 0 on success, 1 on a contract violation (bad config or
arguments) and 2 on an I/O failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ContractViolation
from .games import game_from_config
from .harness.diagnostics import run_diagnostics
from .harness.experiment import ExperimentConfig, export_csv, load_config, read_csv, run_experiment, write_metadata
from .harness.rates import fit_rate
from .solvers import solve_ne

EXIT_OK, EXIT_CONTRACT, EXIT_IO = 0, 1, 2


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _game_spec(args) -> dict:
    if args.config:
        data = load_config(args.config)
        spec = data.get("game", data) if isinstance(data, dict) else data
    else:
        spec = {"game": args.game}
    return spec


def cmd_run(args) -> int:
    data = load_config(args.config)
    for key in ("seed", "runs", "horizon", "out", "workers"):
        value = getattr(args, key)
        if value is not None:
            data[key] = value
    config = ExperimentConfig.from_dict(data)
    if not config.out:
        raise ContractViolation("no output path: set 'out' in the config or pass --out")
    result = run_experiment(config)
    path = export_csv(result.table, config.out)
    write_metadata(result.metadata, str(path) + ".meta.json")
    _emit({"csv": str(path), "rows": len(result.table), **{k: result.metadata[k] for k in ("reference_mode", "reference")}})
    return EXIT_OK


def cmd_rates(args) -> int:
    table = read_csv(args.csv)
    _emit(fit_rate(table, args.tail_fraction).to_dict())
    return EXIT_OK


def cmd_diagnose(args) -> int:
    grid = None
    if args.config:
        data = load_config(args.config)
        grid = data.get("diagnostics") if isinstance(data, dict) else None
    results = run_diagnostics(_game_spec(args), grid)
    _emit({"all_passed": all(r.passed for r in results), "probes": [r.to_dict() for r in results]})
    return EXIT_OK


def cmd_solve_ne(args) -> int:
    game = game_from_config(_game_spec(args))
    result = solve_ne(game, tol=args.tol)
    _emit(result.to_dict())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="payoffnash", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment and write the aggregated CSV")
    p.add_argument("config")
    p.add_argument("--seed", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("rates", help="fit the log-log convergence slope of a CSV")
    p.add_argument("csv")
    p.add_argument("--tail-fraction", type=float, default=None)
    p.set_defaults(func=cmd_rates)

    for name, func, helptext in (("diagnose", cmd_diagnose, "run the estimator probes"),
                                 ("solve-ne", cmd_solve_ne, "compute the Nash equilibrium")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config", nargs="?")
        p.add_argument("--game", default="canonical_quadratic")
        if name == "solve-ne":
            p.add_argument("--tol", type=float, default=1e-10)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ContractViolation as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
