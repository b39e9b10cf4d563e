"""Bridge CLI: batch encoding and the fetch service."""

from __future__ import annotations

import argparse
import json
import sys

from .encode import encode_manifest, load_manifest
from .encoders import DEFAULT_DIM, make_encoder
from .fetcher import HttpBackend, ManifestBackend, serve_stdio, serve_tcp


def cmd_encode(args: argparse.Namespace) -> int:
    with open(args.manifest, "r", encoding="utf-8") as fh:
        items = load_manifest(fh)
    encoder = make_encoder(args.model, dim=args.dim, model=args.checkpoint)
    with open(args.out, "wb") as out:
        summary = encode_manifest(items, encoder, out)
    print(json.dumps({
        "count": summary.count,
        "dim": summary.dim,
        "failures": [{"id": i, "reason": r} for i, r in summary.failures],
    }))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    if args.backend == "manifest":
        if not args.manifest:
            print(json.dumps({"error": "manifest backend needs --manifest"}), file=sys.stderr)
            return 2
        with open(args.manifest, "r", encoding="utf-8") as fh:
            backend = ManifestBackend.from_file(fh)
    else:
        if not args.endpoint:
            print(json.dumps({"error": "live backend needs --endpoint"}), file=sys.stderr)
            return 2
        backend = HttpBackend(args.endpoint)
    if args.addr:
        serve_tcp(args.addr, backend)
    else:
        serve_stdio(backend)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmbridge",
                                     description="Embedding and fetch bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("encode", help="encode a manifest of texts/images to EMB1")
    p.add_argument("--manifest", required=True, help="JSONL of {id, kind, payload}")
    p.add_argument("--out", required=True, help="EMB1 output path")
    p.add_argument("--model", choices=["tiny", "clip"], default="tiny")
    p.add_argument("--dim", type=int, default=DEFAULT_DIM,
                   help="output dim (tiny encoder only)")
    p.add_argument("--checkpoint", default=None, help="clip checkpoint name/path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("serve", help="serve the fetch exchange protocol")
    p.add_argument("--backend", choices=["manifest", "live"], default="manifest")
    p.add_argument("--manifest", default=None, help="query->images TSV")
    p.add_argument("--endpoint", default=None, help="live HTTP endpoint")
    p.add_argument("--addr", default=None, help="host:port (default: stdio)")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 2
    except ValueError as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(json.dumps({"error": f"{type(exc).__name__}: {exc}"}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
