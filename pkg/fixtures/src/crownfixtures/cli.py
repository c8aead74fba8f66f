"""Command line for building the fixture set."""

from __future__ import annotations

import argparse
import sys

from .data import load_split
from .export import build_fixtures
from .specs import DEFAULT_SPECS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crownfixtures", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", help="train every fixture and export its files")
    b.add_argument("--out-dir", required=True)
    b.add_argument("--only", default=None,
                   help="comma-separated fixture names (default: all)")
    b.add_argument("--skip-golden", action="store_true",
                   help="skip the certifier CLI golden reports")
    b.set_defaults(handler=cmd_build)
    return parser


def cmd_build(args) -> int:
    specs = list(DEFAULT_SPECS)
    if args.only:
        wanted = {s.strip() for s in args.only.split(",") if s.strip()}
        known = {s.name for s in specs}
        unknown = sorted(wanted - known)
        if unknown:
            print(f"error: unknown fixtures {unknown}; "
                  f"choose from {sorted(known)}", file=sys.stderr)
            return 1
        specs = [s for s in specs if s.name in wanted]
    build_fixtures(args.out_dir, specs, load_split(),
                   golden=not args.skip_golden, log=print)
    print(f"wrote {len(specs)} fixtures to {args.out_dir}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
