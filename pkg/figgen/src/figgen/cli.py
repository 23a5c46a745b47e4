"""figgen command line: render figure specs against results bundles."""

from __future__ import annotations

import argparse
import json
import sys

from .render import FigureSpec, MissingQuantity, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figgen", description="Render figures from results bundles."
    )
    parser.add_argument("--spec", required=True, help="figure spec JSON")
    parser.add_argument("--out", required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        with open(args.spec, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        specs = payload if isinstance(payload, list) else [payload]
        for raw in specs:
            for path in render(FigureSpec.from_dict(raw), out_dir=args.out):
                print(path)
    except MissingQuantity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
