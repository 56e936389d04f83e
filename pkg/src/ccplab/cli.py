"""Command-line front end: ``ccplab <scenario> [--config PATH] [flags]``.

Flags override the config document. Output goes to ``--out``, else to the
``out`` key of the config, else to ``$CCPLAB_OUTPUT_DIR/<scenario>.<format>``
when that variable is set, else to stdout.

Exit codes: 0 success, 2 config error, 3 numerical-precondition error,
4 I/O error. Failures print one JSON diagnostic object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .errors import CCPLabError, ConfigError, NumericalPreconditionError
from .harness.config import SCENARIOS, parse_config
from .harness.output import FORMATS, emit
from .harness.scenarios import run_scenario

OUTPUT_DIR_ENV = "CCPLAB_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("ccplab")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which already is the config code;
    # this only makes the message a structured diagnostic as well.
    def error(self, message):
        _diagnose(EXIT_CONFIG, "usage", message, None)
        sys.exit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ccplab", description="Run a named scenario and emit CSV or JSON results.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="scenario", required=True, metavar="scenario", parser_class=_Parser)
    for name, sdef in SCENARIOS.items():
        p = sub.add_parser(name, help=sdef.summary, description=sdef.summary)
        p.add_argument("--config", metavar="PATH", help="JSON config document")
        p.add_argument("--out", metavar="PATH", help="output file (written atomically)")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--seed", type=int)
        p.add_argument("--D", type=int, dest="D")
        p.add_argument("--L", type=float, dest="L")
        p.add_argument("--hbar", type=float)
        p.add_argument("--mass", type=float)
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a scenario parameter; VALUE is parsed as JSON when possible",
        )
        p.add_argument("-v", "--verbose", action="store_true", help="log timing to stderr")
        keys = ", ".join(f"{k} (default {v.default!r})" for k, v in sdef.params.items())
        p.epilog = f"parameters: {keys}" if keys else None
    return parser


def _diagnose(exit_code, code, message, scenario):
    doc = {"error": {"code": code, "exit_code": exit_code, "scenario": scenario, "message": message}}
    print(json.dumps(doc, ensure_ascii=False), file=sys.stderr)


def _parse_set(items) -> dict:
    out = {}
    for item in items:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _target(args, config):
    if args.out:
        return args.out
    if config.out:
        return config.out
    directory = os.environ.get(OUTPUT_DIR_ENV)
    if directory:
        return os.path.join(directory, f"{config.scenario}.{config.format}")
    return None


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    scenario = args.scenario
    try:
        text = None
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        overrides = {"D": args.D, "L": args.L, "hbar": args.hbar, "mass": args.mass, "seed": args.seed, "format": args.format}
        overrides.update(_parse_set(args.set))
        config = parse_config(text, scenario=scenario, overrides=overrides)
        envelope = run_scenario(config)
        log.info("%s finished in %.3f s", scenario, envelope.duration)
        path = _target(args, config)
        rendered = emit(envelope, config.format, path)
        if path is None:
            sys.stdout.write(rendered)
    except ConfigError as exc:
        _diagnose(EXIT_CONFIG, exc.code, str(exc), scenario)
        return EXIT_CONFIG
    except NumericalPreconditionError as exc:
        _diagnose(EXIT_NUMERICAL, exc.code, str(exc), scenario)
        return EXIT_NUMERICAL
    except CCPLabError as exc:
        _diagnose(EXIT_NUMERICAL, exc.code, str(exc), scenario)
        return EXIT_NUMERICAL
    except OSError as exc:
        _diagnose(EXIT_IO, "io", str(exc), scenario)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
