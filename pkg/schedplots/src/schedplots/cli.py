"""Command line entry point: ``schedplots render <csv> <kind> <out> [--logx]``."""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_KINDS, FigureSpec, PlotInputError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="schedplots",
        description="Render barsched experiment CSVs as static figures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    rend = sub.add_parser("render", help="render one figure from an experiment csv")
    rend.add_argument("csv", help="experiment csv written by the harness")
    rend.add_argument("kind", choices=sorted(FIGURE_KINDS), help="figure family")
    rend.add_argument("out", help="output image path (png)")
    rend.add_argument("--logx", action="store_true", help="logarithmic x axis")
    args = parser.parse_args(argv)

    try:
        render(FigureSpec(args.csv, args.kind, args.out, log_x=args.logx))
    except PlotInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(args.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
