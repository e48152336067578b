"""Command-line interface: ``run``, ``sweep`` and ``check`` subcommands.

Exit codes: 0 success, 1 usage/config error, 2 partial failures (more than 10%
of trials failed), 3 total failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .errors import ConfigError
from .experiments import (
    emit_plot_data,
    load_config,
    run_sweep,
    snr_db_of,
    write_aggregates,
    write_csv,
)
from .selfcheck import run_checks
from .solver import STATUS_SOLVER_FAILURE

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARTIAL = 2
EXIT_FAILURE = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cranpool",
                     description="Two-operator C-RAN spectrum pooling optimizer")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, doc in (("run", "single-cell run: the config's base SNR and privacy "
                              "threshold, all configured trials"),
                      ("sweep", "full cross-product sweep over SNR, privacy "
                                "threshold, schemes and modes")):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", required=True, help="path to the key=value config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel trial workers (default from config)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the sweep base seed")

    sub.add_parser("check", help="run the built-in invariant/oracle suites")
    return parser


def _finish(records, aggregates, out_dir, emit_series: bool) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(records, out_dir / "records.csv")
    write_aggregates(aggregates, out_dir / "aggregates.csv")
    if emit_series:
        emit_plot_data(aggregates, out_dir / "series")
    failed = sum(1 for r in records if r.status == STATUS_SOLVER_FAILURE)
    total = len(records)
    print(f"{total} trial records written to {out_dir / 'records.csv'}"
          f" ({failed} failed)")
    if failed == total:
        return EXIT_FAILURE
    if failed > 0.10 * total:
        return EXIT_PARTIAL
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "check":
        return EXIT_OK if run_checks() else EXIT_FAILURE

    try:
        config, spec, options, workers = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.workers is not None:
        workers = args.workers
    if args.seed is not None:
        spec = replace(spec, base_seed=args.seed)

    if args.command == "run":
        spec = replace(spec, snr_list_db=(snr_db_of(config),),
                       privacy_list_bps=(config.privacy_threshold,))
    try:
        records, aggregates = run_sweep(spec, config, options, workers=workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return _finish(records, aggregates, args.out, emit_series=args.command == "sweep")


if __name__ == "__main__":
    sys.exit(main())
