"""Command-line entry: orl-plots render --kind <k> --in <paths...> --out <file>."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, render
from .series import InputError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


class UsageError(Exception):
    pass


def build_parser() -> _Parser:
    parser = _Parser(prog="orl-plots", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure from metrics/report files")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        render(args.kind, args.inputs, args.out)
        print(f"wrote {args.out}")
        return 0
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (InputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())
