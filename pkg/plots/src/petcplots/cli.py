"""plots: render a run manifest's CSV artifacts into figure files.

Exit codes: 0 success, 2 command line problems, 3 anything wrong with the
artifacts (missing columns, empty traces, unreadable manifest).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import PlotsError
from .figures import FORMATS, SELECTIONS, PlotJob, render
from .manifest import load_manifest


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plots",
        description="Render figures from a run manifest and its CSVs.")
    parser.add_argument("--manifest", required=True, metavar="PATH",
                        help="run_manifest.json written by the toolkit")
    parser.add_argument("--select", default="auto", metavar="LIST",
                        help="comma list out of pos,vel,input,frontier "
                             "(default: whatever the manifest supports)")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="directory for the figure files")
    parser.add_argument("--format", default="png,svg", metavar="LIST",
                        dest="formats", help="comma list out of png,svg,pdf")
    parser.add_argument("--dpi", type=int, default=150)
    return parser


def _csv_list(text: str, valid, parser, what: str) -> tuple[str, ...]:
    names = tuple(s.strip() for s in text.split(",") if s.strip())
    unknown = [n for n in names if n not in valid]
    if unknown or not names:
        parser.error(f"unknown {what} {unknown or text!r}; "
                     f"valid ones are {','.join(valid)}")
    return names


def _auto_selection(manifest_path) -> tuple[str, ...]:
    man = load_manifest(manifest_path)
    if man.of_kind("trace"):
        return ("pos", "vel", "input")
    return ("frontier",)


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    try:
        if args.select == "auto":
            selection = _auto_selection(args.manifest)
        else:
            selection = _csv_list(args.select, SELECTIONS, parser, "selection")
        job = PlotJob(manifest=Path(args.manifest), selection=selection,
                      outdir=Path(args.out),
                      formats=_csv_list(args.formats, FORMATS, parser, "format"),
                      dpi=args.dpi)
        written = render(job)
    except PlotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
