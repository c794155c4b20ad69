"""Command-line front end: ``rsl run``, ``rsl refine`` and ``rsl catalog``."""

from __future__ import annotations

import argparse
import logging
import sys

from .catalog import describe
from .config import load_config
from .errors import ConfigError
from .scenario import run_refinement_study, run_scenario

__all__ = ["main", "list_catalog"]


def list_catalog():
    return describe()


def _load(path):
    try:
        return load_config(path), None
    except ConfigError as exc:
        return None, exc


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="rsl", description="Ricci flow eigenvalue laboratory: run scenarios and convergence studies"
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("config")
    p_ref = sub.add_parser("refine", help="grid refinement study of a scenario file")
    p_ref.add_argument("config")
    p_ref.add_argument("--levels", type=int, default=None, help="number of grid levels (2-4)")
    sub.add_parser("catalog", help="list model families, phi expressions and checks")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    if args.command == "catalog":
        sys.stdout.write(list_catalog())
        return 0

    config, err = _load(args.config)
    if err is not None:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    if args.command == "run":
        result = run_scenario(config)
    else:
        result = run_refinement_study(config, args.levels)
    out = sys.stdout if result.exit_code in (0, 1) else sys.stderr
    print(result.summary(), file=out)
    for path in result.csv_paths:
        print(f"wrote {path}")
    if result.report_path:
        print(f"wrote {result.report_path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
