"""CLI: render one figure spec.  Usage: figures <spec.toml>"""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, SchemaError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="figures", description="render a cohsurf metrics CSV into a figure"
    )
    parser.add_argument("spec", help="TOML figure specification")
    args = parser.parse_args(argv)
    try:
        out = render(FigureSpec.from_toml(args.spec))
    except SchemaError as e:
        print(f"schema error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"missing input: {e}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
