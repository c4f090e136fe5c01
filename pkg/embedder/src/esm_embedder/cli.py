"""Command line: `esm-embedder embed` writes an AEMB file, `esm-embedder
serve` exposes the same operation over HTTP."""

from __future__ import annotations

import argparse
import logging
import sys

from .core import DEFAULT_MODEL, Embedder, EmbedderConfig, EmbedderError, embed_fasta
from .fastaio import FastaError

log = logging.getLogger("esm_embedder")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="esm-embedder",
        description="Emit per-residue ESM-2 embeddings in the AEMB container",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--model", default=DEFAULT_MODEL,
        help="checkpoint name or local path (default: %(default)s)",
    )
    common.add_argument(
        "--layer", type=int, default=None,
        help="representation layer index (default: final layer)",
    )
    common.add_argument("--device", default="cpu", help="torch device (default: cpu)")

    sub = parser.add_subparsers(dest="command", required=True)
    embed = sub.add_parser("embed", parents=[common], help="FASTA file -> AEMB file")
    embed.add_argument("--fasta", required=True, help="input FASTA path")
    embed.add_argument("--out", required=True, help="output AEMB path")
    serve = sub.add_parser("serve", parents=[common], help="run the /embed endpoint")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    args = build_parser().parse_args(argv)
    config = EmbedderConfig(model_name=args.model, layer=args.layer, device=args.device)
    try:
        if args.command == "embed":
            count = embed_fasta(config, args.fasta, args.out)
            log.info("wrote %d records to %s", count, args.out)
        else:
            import uvicorn

            from .service import create_app

            uvicorn.run(create_app(Embedder(config)), host=args.host, port=args.port)
    except (EmbedderError, FastaError, OSError) as exc:
        log.error("error: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
