"""Render one figure from scenario outputs:

    python -m plme_figures <figure-name> --data DIR --out FILE
    python -m plme_figures --list
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .io import FigureDataError
from .layouts import FigureSpec, list_figures, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plme_figures")
    parser.add_argument("figure", nargs="?", help="figure name (see --list)")
    parser.add_argument("--data", type=Path, help="directory with scenario CSV outputs")
    parser.add_argument("--out", type=Path, help="output image path (.svg or .png)")
    parser.add_argument("--list", action="store_true", help="list available figures")
    args = parser.parse_args(argv)

    if args.list:
        for name in list_figures():
            print(name)
        return 0
    if not args.figure or args.data is None or args.out is None:
        parser.error("figure name, --data and --out are required (or use --list)")
    try:
        out = render(FigureSpec(name=args.figure, data_dir=args.data, out_path=args.out))
    except FigureDataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
