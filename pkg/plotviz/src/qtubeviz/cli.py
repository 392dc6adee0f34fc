"""Command-line renderer: one figure per invocation from a run manifest."""

from __future__ import annotations

import argparse
import sys

from .figures import KINDS, render, spec_from_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="render",
        description="Render a figure from qtube trajectory CSVs and their manifest.",
    )
    parser.add_argument("--figure", required=True, choices=KINDS)
    parser.add_argument("--manifest", required=True, help="run manifest written by qtube")
    parser.add_argument("--out", required=True, help="output image path (PNG)")
    parser.add_argument(
        "--trajectory", help="label of the trajectory to draw (single-path figures)"
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_manifest(args.figure, args.manifest, args.out, args.trajectory)
        out = render(spec)
    except (ValueError, FileNotFoundError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
