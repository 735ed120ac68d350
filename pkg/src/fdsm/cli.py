"""Command-line entry point.

Subcommands:
  run <preset | config path>   execute an experiment, write CSVs + figures
  validate <config path>       check a config file, print the resolved form
  parse <cdf path>             print a parsed case summary
  report <output dir>          render figures from an existing run's CSVs

Exit codes: 0 success, 2 invalid config, 3 centralized request intractable.
"""

from __future__ import annotations

import argparse
import os
import sys

from .cdf import CdfParseError, GridValidationError, parse_cdf
from .centralized import IntractableError
from .config import ConfigError, validate_config
from .experiments import PRESETS, preset_config, run_experiment


def _load_config(target):
    if target in PRESETS:
        return preset_config(target)
    with open(target) as fh:
        return validate_config(fh.read())


def cmd_run(args):
    try:
        cfg = _load_config(args.target)
    except FileNotFoundError:
        print(f"error: no preset or config file named {args.target!r}; "
              f"presets: {', '.join(sorted(PRESETS))}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.seeds is not None:
        cfg.n_seeds = args.seeds
    if args.scheme:
        cfg.schemes = args.scheme
    if args.horizon is not None:
        cfg.horizon = args.horizon
    out = args.out or os.environ.get("FDSM_OUT") or cfg.out_dir
    figures = cfg.figures and not args.no_figures
    try:
        run_experiment(cfg, out_dir=out, write_figures=figures)
    except IntractableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    return 0


def cmd_validate(args):
    try:
        with open(args.config) as fh:
            cfg = validate_config(fh.read())
    except FileNotFoundError:
        print(f"error: config file not found: {args.config}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    print(cfg.dump())
    return 0


def cmd_parse(args):
    try:
        with open(args.case) as fh:
            model = parse_cdf(fh.read(), default_capacity=args.default_capacity)
    except FileNotFoundError:
        print(f"error: case file not found: {args.case}", file=sys.stderr)
        return 2
    except (CdfParseError, GridValidationError) as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    print(f"case: {model.name}")
    print(f"buses: {model.n_buses}  lines: {model.n_lines}")
    print(f"generator buses: {[b.id for b in model.buses if b.gen_mw > 0 or b.cdf_type in (2, 3)]}")
    print(f"slack bus: {model.slack_bus}")
    total_load = sum(b.load_mw for b in model.buses)
    print(f"total load: {total_load:.1f} MW")
    return 0


def cmd_report(args):
    from .report import render_figures
    written = render_figures(args.out_dir)
    if not written:
        print("no renderable CSV data found", file=sys.stderr)
        return 2
    for p in written:
        print(p)
    return 0


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="fdsm",
        description="Foresighted demand-side management simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment preset or config file")
    p.add_argument("target", help=f"preset ({', '.join(sorted(PRESETS))}) "
                   "or path to an INI config")
    p.add_argument("--seeds", type=int, default=None,
                   help="override the number of seeds")
    p.add_argument("--scheme", action="append", default=None,
                   help="restrict to a scheme (repeatable)")
    p.add_argument("--horizon", type=int, default=None,
                   help="override the episode horizon")
    p.add_argument("--out", default=None,
                   help="output directory (or set FDSM_OUT)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip figure rendering")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("validate", help="validate a config file")
    p.add_argument("config")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("parse", help="parse a CDF case file")
    p.add_argument("case")
    p.add_argument("--default-capacity", type=float, default=100.0)
    p.set_defaults(fn=cmd_parse)

    p = sub.add_parser("report", help="render figures from run CSVs")
    p.add_argument("out_dir")
    p.set_defaults(fn=cmd_report)

    args = ap.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
