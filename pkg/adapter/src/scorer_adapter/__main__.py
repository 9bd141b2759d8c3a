"""Entry point: pick a backend and serve stdin/stdout or a socket."""

from __future__ import annotations

import argparse
import sys

from .backends import LoopbackBackend, SubwordSeq2SeqBackend
from .server import serve, serve_socket


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="scorer-adapter",
        description="Score target sequences for the template-ner engine "
        "over the line protocol.",
    )
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--checkpoint", help="built-in engine checkpoint (loopback)")
    group.add_argument("--hf-model", help="pretrained seq2seq model path")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--socket", metavar="HOST:PORT", default=None,
                        help="serve one TCP connection instead of stdio")
    args = parser.parse_args(argv)

    if args.checkpoint:
        backend = LoopbackBackend(args.checkpoint)
    else:
        backend = SubwordSeq2SeqBackend(args.hf_model, device=args.device)

    if args.socket:
        host, _, port = args.socket.rpartition(":")
        serve_socket(backend, host or "127.0.0.1", int(port))
    else:
        serve(backend, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
