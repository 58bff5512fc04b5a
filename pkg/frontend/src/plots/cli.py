"""Command-line entry point: ``plots render <figure-spec-file>``.

Exit codes: 0 success; 1 spec/config error; 2 input-CSV schema mismatch
(the column diff is printed to stderr).
"""

from __future__ import annotations

import argparse
import sys

from plots.figspec import SpecError, load_figure_spec
from plots.render import SchemaError, render

EXIT_OK = 0
EXIT_SPEC = 1
EXIT_SCHEMA = 2


def _cmd_render(args) -> int:
    try:
        spec = load_figure_spec(args.specfile)
        out = render(spec)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except FileNotFoundError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except SchemaError as exc:
        print(f"schema mismatch in {args.specfile}: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="plots", description="render CSV figures")
    sub = parser.add_subparsers(dest="command", required=True)
    p_render = sub.add_parser("render", help="render a figure from a spec file")
    p_render.add_argument("specfile", help="flat key=value figure spec")
    p_render.set_defaults(fn=_cmd_render)
    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    raise SystemExit(main())
