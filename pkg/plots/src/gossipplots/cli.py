"""Batch figure rendering: gossip-plot <figure-kind> --in <dir> --out <file>."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .figures import FIGURE_KINDS, FigureSpec, PlotInputError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossip-plot",
        description="Render gossip-experiment outputs into figures",
    )
    parser.add_argument("kind", choices=list(FIGURE_KINDS), help="figure kind")
    parser.add_argument("--in", dest="input_dir", required=True, help="experiment output directory")
    parser.add_argument("--out", dest="out_path", required=True, help="image file to write")
    parser.add_argument("--log-x", dest="log_x", action="store_true", default=None)
    parser.add_argument("--no-log-x", dest="log_x", action="store_false")
    parser.add_argument("--log-y", dest="log_y", action="store_true", default=None)
    parser.add_argument("--no-log-y", dest="log_y", action="store_false")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        kind=args.kind,
        input_dir=Path(args.input_dir),
        out_path=Path(args.out_path),
        log_x=args.log_x,
        log_y=args.log_y,
    )
    try:
        out = render(spec)
    except (PlotInputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
