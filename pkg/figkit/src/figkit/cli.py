"""figkit command line: render one figure from a trajtherm CSV bundle.

Usage: figkit <figure-id> --in <bundle-dir> --out <image-file>
"""

from __future__ import annotations

import argparse
import sys

from .figures import FIGURE_IDS, FigureSpec, render
from .schema import EmptyBundle, MissingColumn, SchemaMismatch


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figkit", description=__doc__)
    parser.add_argument("figure_id", choices=FIGURE_IDS)
    parser.add_argument("--in", dest="indir", required=True,
                        help="bundle directory written by `trajtherm run`")
    parser.add_argument("--out", dest="outfile", required=True,
                        help="output image path (.png or .svg)")
    args = parser.parse_args(argv)
    try:
        render(FigureSpec(args.figure_id, args.indir, args.outfile))
    except (SchemaMismatch, MissingColumn, EmptyBundle, FileNotFoundError) as exc:
        print(f"figkit: {exc}", file=sys.stderr)
        return 2
    print(args.outfile)
    return 0


if __name__ == "__main__":
    sys.exit(main())
