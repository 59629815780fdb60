"""Worker entry point: `python -m capecmatch_worker serve|write-cache`."""

from __future__ import annotations

import argparse
import json
import sys

from .cache import write_cache_batch
from .encoders import EncoderError, create_encoder
from .protocol import serve


def cmd_serve(args) -> int:
    try:
        encoder = create_encoder(args.model)
    except EncoderError as exc:
        # Handshake error object instead of a handshake, then a nonzero exit.
        print(json.dumps({"error": str(exc)}), flush=True)
        return 1
    return serve(encoder, sys.stdin, sys.stdout)


def cmd_write_cache(args) -> int:
    try:
        encoder = create_encoder(args.model)
    except EncoderError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr, flush=True)
        return 1
    try:
        count = write_cache_batch(args.texts, args.out, encoder)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {count} vectors ({encoder.model_id}, dim {encoder.dimension}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capecmatch-worker", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="speak the JSON-line protocol on stdin/stdout")
    p.add_argument("--model", required=True, help="sentence encoder id or test-hash")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("write-cache", help="embed a texts file into a TLEC1 cache")
    p.add_argument("--model", required=True)
    p.add_argument("--texts", required=True, help='JSON lines of {"id","text"}')
    p.add_argument("--out", required=True, help="cache file to write")
    p.set_defaults(func=cmd_write_cache)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
