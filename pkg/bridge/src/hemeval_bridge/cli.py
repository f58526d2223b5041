"""hemeval-bridge command line.

Subcommands: export-captions, export-embeddings, export-token-embeddings.
Exit codes: 0 success, 2 invalid input, 1 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .backends import BridgeError
from .export import export_captions, export_embeddings, export_token_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hemeval-bridge",
        description="Export model outputs into hemeval's JSONL formats.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-captions", help="greedy captions, one line per image")
    p.add_argument("--images", required=True, help="directory of cell images")
    p.add_argument("--checkpoint", required=True, help="checkpoint id, e.g. statproj-16")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument(
        "--sample-seed",
        type=int,
        default=None,
        help="enable seeded sampling instead of greedy decoding",
    )

    p = sub.add_parser("export-embeddings", help="pooled image embeddings")
    p.add_argument("--images", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("export-token-embeddings", help="per-token text embeddings")
    p.add_argument("--vocabulary", required=True, help="one token per line")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-captions":
            summary = export_captions(
                args.images, args.checkpoint, args.out, sample_seed=args.sample_seed
            )
            print(f"wrote {summary.written} captions ({summary.rejected} rejected)")
        elif args.command == "export-embeddings":
            summary = export_embeddings(args.images, args.checkpoint, args.out)
            print(f"wrote {summary.written} embeddings ({summary.rejected} rejected)")
        else:
            summary = export_token_embeddings(args.vocabulary, args.checkpoint, args.out)
            print(f"wrote {summary.written} token vectors")
        return 0
    except (BridgeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # internal failure, distinct exit code
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
