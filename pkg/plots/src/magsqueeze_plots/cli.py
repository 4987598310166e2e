"""Command line: render one figure from magsqueeze CSV output.

Exit codes: 0 success, 1 malformed input (named-column errors and the like),
2 bad command line.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import KINDS, PlotError, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magsqueeze-plot",
        description="Render figure analogs (time series, sweep families, heatmaps, "
        "Wigner contours, phase sweeps) from magsqueeze CSV files.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--input", "-i", nargs="+", required=True, metavar="CSV",
        help="input CSV file(s); timeseries accepts two branches to overlay",
    )
    parser.add_argument("--output", "-o", required=True, metavar="IMG",
                        help="output image path (.png or .svg)")
    parser.add_argument("--svg", action="store_true",
                        help="also write an .svg next to the output")
    parser.add_argument("--title", default="", help="optional figure title")
    parser.add_argument("--colormap", default="viridis", help="matplotlib colormap name")
    parser.add_argument("--label", nargs="*", default=[],
                        help="curve labels (default: derived from file names)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = PlotSpec(
            kind=args.kind,
            inputs=tuple(Path(p) for p in args.input),
            output=Path(args.output),
            title=args.title,
            colormap=args.colormap,
            also_svg=args.svg,
            labels=tuple(args.label),
        )
        written = render(spec)
    except PlotError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
