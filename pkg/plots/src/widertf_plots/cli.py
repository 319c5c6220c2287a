"""Command-line entry point: render --csv <path> --out-dir <dir>."""

from __future__ import annotations

import argparse
import sys

from . import SchemaError, render_csv


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a widertf harness CSV into one figure per panel.")
    parser.add_argument("--csv", required=True, help="harness result CSV")
    parser.add_argument("--out-dir", required=True, help="output directory")
    parser.add_argument("--dpi", type=int, default=120)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    try:
        panels = render_csv(args.csv, args.out_dir, dpi=args.dpi)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for stem in sorted(panels):
        print(panels[stem].path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
