"""Command line interface: run, study and validate subcommands.

Usage:

    pnpflow run    config.json [--out DIR] [--override key=value ...]
    pnpflow study  config.json [--out DIR] [--workers N] [--override ...]
    pnpflow validate config.json [--override ...]

Exit code 0 on success.  Failures print a single machine-readable JSON
object to stderr: {"error": ..., "violations": [...]} for configuration
problems, {"error": ..., "message": ...} for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, apply_overrides, parse_config, serialize
from .runner import run_convergence_study, run_experiment


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnpflow",
        description=(
            "Structure-preserving solver for two-species drift-diffusion "
            "systems with electrostatic coupling"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("run", "execute one configured experiment"),
        ("study", "execute a convergence study"),
        ("validate", "check a configuration and print its canonical form"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("config", help="path to the JSON configuration")
        cmd.add_argument(
            "--override",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry by dotted path (repeatable)",
        )
        if name != "validate":
            cmd.add_argument("--out", default=None, help="output directory")
        if name == "study":
            cmd.add_argument(
                "--workers", type=int, default=1, help="parallel study levels"
            )
    return parser


def _load_config(args):
    with open(args.config) as fh:
        text = fh.read()
    if args.override:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"invalid JSON: {exc}"]) from None
        doc = apply_overrides(doc, args.override)
        text = json.dumps(doc)
    return parse_config(text)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "validate":
            sys.stdout.write(serialize(cfg))
            return 0
        if args.command == "run":
            summary = run_experiment(cfg, out_dir=args.out)
            out = args.out if args.out is not None else cfg.output_dir
            print(f"run complete: {summary['steps']} steps, artifacts in {out}")
            return 0
        summary = run_convergence_study(cfg, workers=args.workers, out_dir=args.out)
        out = args.out if args.out is not None else cfg.output_dir
        print(
            f"study complete: {len(summary['params'])} levels, artifacts in {out}"
        )
        return 0
    except ConfigError as exc:
        json.dump(
            {"error": "invalid configuration", "violations": exc.violations},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return 1
    except FileNotFoundError as exc:
        json.dump(
            {"error": "file not found", "message": str(exc)}, sys.stderr
        )
        sys.stderr.write("\n")
        return 1
    except Exception as exc:  # noqa: BLE001 - surface anything as error JSON
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)}, sys.stderr
        )
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
