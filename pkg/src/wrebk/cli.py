"""Command-line entry point.

::

    wrebk run --config FILE [--set key=value ...] --out DIR --format csv|markdown
    wrebk bench --suite burgers|bratu|heat [--out DIR] [--format ...]

The exit status is 0 only when every run completed.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import ConfigError, bench_suite, load_config, run_batch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wrebk", description="Nonlinear waveform relaxation experiments")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one or more configured experiments")
    p_run.add_argument("--config", action="append", required=True, metavar="FILE",
                       help="flat 'key = value' config file; repeat for a batch")
    p_run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config key (applied to every config)")
    p_run.add_argument("--out", required=True, metavar="DIR", help="output directory")
    p_run.add_argument("--format", choices=("csv", "markdown"), default="markdown")

    p_bench = sub.add_parser("bench", help="run a predefined benchmark suite")
    p_bench.add_argument("--suite", choices=("burgers", "bratu", "heat"), required=True)
    p_bench.add_argument("--out", default=None, metavar="DIR")
    p_bench.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    if args.command == "run":
        try:
            configs = [load_config(path, args.set) for path in args.config]
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 2
        except OSError as exc:
            print(f"cannot read config: {exc}", file=sys.stderr)
            return 2
    else:
        configs = bench_suite(args.suite)

    results, text = run_batch(configs, args.out, args.format)
    sys.stdout.write(text)
    failed = [r for r in results if r.row.status != "ok"]
    for r in failed:
        print(f"run failed: {r.row.problem} / {r.row.method}: {r.error}", file=sys.stderr)
    return 1 if failed else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
