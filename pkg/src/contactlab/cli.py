"""Command line entry point: ``contactlab run|suite|plot|validate``.

Exit codes: 0 success, 1 a check failed, 2 bad configuration,
3 sampling aborted (rejection floor or truncation).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .scenarios import (EXIT_CONFIG, EXIT_OK, OUTPUT_ENV, ConfigError, load_scenario,
                        run_scenario, run_suite)

log = logging.getLogger("contactlab")


def _cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    code, out, summary = run_scenario(sc, args.output)
    print(json.dumps({"exit_code": code, "output": str(out), **{k: summary[k] for k in
                      ("name", "operation", "verdicts", "curves") if k in summary}}))
    return code


def _cmd_suite(args) -> int:
    code, root, report = run_suite(args.suite, args.output)
    for row in report["table"]:
        print(f"{row['name']:<32} {row['operation'] or '-':<30} exit={row['exit_code']}")
    print(f"summary: {root / 'summary.json'}")
    return code


def _cmd_plot(args) -> int:
    from .records import atomic_write, read_curve
    from .svg import render
    series = []
    for p in args.curves:
        try:
            t, v, e = read_curve(p)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read curve {p}: {exc}") from exc
        series.append((Path(p).stem, t, v, e))
    atomic_write(args.output, render(series, args.title or "", args.log))
    return EXIT_OK


def _cmd_validate(args) -> int:
    sc = load_scenario(args.scenario)
    print(json.dumps({"valid": True, "name": sc.name, "operation": sc.operation,
                      "config_hash": sc.hash}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="contactlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one scenario file")
    p.add_argument("scenario")
    p.add_argument("--output", help=f"output root (default ${OUTPUT_ENV} or ./runs)")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("suite", help="run every scenario of a suite file")
    p.add_argument("suite")
    p.add_argument("--output", help=f"output root (default ${OUTPUT_ENV} or ./runs)")
    p.set_defaults(func=_cmd_suite)

    p = sub.add_parser("plot", help="render curve CSVs to an SVG")
    p.add_argument("curves", nargs="+")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--log", action="store_true", help="log scale on the value axis")
    p.add_argument("--title")
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("validate", help="check a scenario file without running it")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
