"""figkit <kind> --in file.csv [--in more.csv] --out fig.png [--ycap 4.0]"""

from __future__ import annotations

import argparse
import sys

from .errors import FigkitError
from .render import PLOT_KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figkit",
        description="Render specshape CSV outputs (metrics, probes, sweeps, "
        "schedules, shaping-error tables) to figure files.",
    )
    parser.add_argument("kind", choices=PLOT_KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        help="input CSV; repeat to overlay runs where supported")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--ycap", type=float, default=None,
                        help="cap the y-axis at this value")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(kind=args.kind, inputs=tuple(args.inputs), out=args.out,
                    ycap=args.ycap)
    try:
        render(spec)
    except FigkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
