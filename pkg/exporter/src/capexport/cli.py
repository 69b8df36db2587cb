"""Command line entry point.

Usage::

    capexport export --model stub:model.json --images ./val_images \\
        --set-id val --strategy beam:4 --out val.jsonl

Exit codes: 0 on success, 2 for invalid inputs or parameters, 3 for
runtime failures (model errors, malformed output lines, I/O).
"""

from __future__ import annotations

import argparse
import sys

from .decoding import Strategy
from .errors import InputError
from .export import ExportJob, run_export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capexport",
        description="Run a captioning model or classifier over an image"
        " directory and emit record lines for the scoring toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    export = sub.add_parser("export", help="export one record line per image")
    export.add_argument(
        "--model",
        required=True,
        help="model identifier: 'stub:FILE.json' or 'module:factory'",
    )
    export.add_argument("--images", required=True, help="directory of input images")
    export.add_argument("--set-id", required=True, help="set identifier stamped on every line")
    export.add_argument(
        "--strategy",
        default="greedy",
        help="decoding strategy: greedy, beam:K, topk:K, or nucleus:P (default: greedy)",
    )
    export.add_argument("--out", required=True, help="output JSONL path")
    export.add_argument(
        "--kind",
        default="captions",
        choices=("captions", "classprobs"),
        help="record kind to emit (default: captions)",
    )
    export.add_argument(
        "--max-len",
        type=int,
        default=16,
        help="maximum caption length including the end token (default: 16)",
    )
    export.add_argument("--seed", type=int, default=0, help="sampling seed (default: 0)")
    export.add_argument(
        "--pos-lexicon",
        default=None,
        help="optional token<TAB>TAG lexicon for part-of-speech annotation",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            model=args.model,
            images=args.images,
            set_id=args.set_id,
            out=args.out,
            strategy=Strategy.parse(args.strategy),
            kind=args.kind,
            max_len=args.max_len,
            seed=args.seed,
            pos_lexicon=args.pos_lexicon,
        )
        stats = run_export(job)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    line = f"wrote {stats.written} line(s) to {args.out}"
    if stats.skipped:
        line += f", skipped {stats.skipped}"
    print(line)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
