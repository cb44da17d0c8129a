"""Command-line entry point.

Exit codes: 0 success, 1 usage or config error, 2 validation failure,
3 resource refusal (oracle memory budget).
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from .cat_dynamics import DegenerateSuperpositionError
from .fock_oracle import OracleMemoryError
from .scenario import (
    SWEEP_AXES,
    ConfigError,
    OutputFormat,
    load_config,
    parse_config,
    run_scenario,
    run_sweep,
)
from .validation import Level, validate

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RESOURCE = 3

PRESETS = tuple(f"fig{n:02d}" for n in range(2, 14))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {PRESETS[0]}..{PRESETS[-1]}")
    return resources.files("cavity_ecs").joinpath("presets", f"{name}.ini").read_text()


def _parse_values(text: str) -> list[float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError("values", f"cannot parse {text!r} as a comma-separated list of numbers") from None


def _output_options(p):
    p.add_argument("--output", "-o", help="data file path (default: config output_path, else no file)")
    p.add_argument("--format", choices=[f.value for f in OutputFormat], help="data file format")
    p.add_argument("--points", type=int, help="number of output time samples")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cavity-ecs", description="Exciton entangled coherent states in three coupled cavities.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("config", help="INI file with [params], [cat], [run] sections")
    _output_options(run)

    sweep = sub.add_parser("sweep", help="repeat a scenario over one parameter")
    sweep.add_argument("config")
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True, help="comma-separated values, e.g. 0,0.05")
    _output_options(sweep)

    val = sub.add_parser("validate", help="run the self-check suite")
    val.add_argument("--full", action="store_true", help="include the Fock-space oracle comparisons (minutes)")
    val.add_argument("--debug-unscaled-prefactor", action="store_true", help=argparse.SUPPRESS)

    pre = sub.add_parser("preset", help="run a bundled figure preset")
    pre.add_argument("name", choices=PRESETS)
    pre.add_argument("--show", action="store_true", help="print the preset config instead of running it")
    _output_options(pre)
    return parser


def _with_overrides(config, args):
    if args.points is not None:
        config = config.replace(n_points=args.points)
    return config


def _run(config, args) -> int:
    config = _with_overrides(config, args)
    report = run_scenario(config, args.output, args.format)
    print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return _run(load_config(args.config), args)
        if args.command == "preset":
            text = preset_text(args.name)
            if args.show:
                print(text, end="")
                return EXIT_OK
            return _run(parse_config(text, source=args.name), args)
        if args.command == "sweep":
            config = _with_overrides(load_config(args.config), args)
            values = _parse_values(args.values)
            reports = run_sweep(config, args.axis, values, args.output, args.format)
            for v, rep in zip(values, reports):
                print(f"{args.axis}={v:g}: t_star={rep.t_star:.6g} witness_min={rep.witness_min:.6g} "
                      f"max_photon_number={rep.max_photon_number:.6g}")
            return EXIT_OK
        if args.command == "validate":
            report = validate(
                Level.FULL if args.full else Level.FAST,
                omit_prefactor=args.debug_unscaled_prefactor,
                progress=print,
            )
            for line in report.lines()[len(report.checks):]:
                print(line)
            return EXIT_OK if report.passed else EXIT_VALIDATION
    except OracleMemoryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, DegenerateSuperpositionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
