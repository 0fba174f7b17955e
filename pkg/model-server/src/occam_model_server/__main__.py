"""Entry point: serve the wire protocol over stdio (default) or HTTP."""
from __future__ import annotations

import argparse
import logging
import sys

from .backends import build_backend
from .config import AdapterConfig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="occam-model-server", description=__doc__)
    parser.add_argument("--backend", default="reference", choices=["reference", "stub"])
    parser.add_argument("--checkpoint", default=AdapterConfig.segmentation_checkpoint,
                        help="segmentation checkpoint id")
    parser.add_argument("--device", default="auto")
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--embed-dim", type=int, default=AdapterConfig.embed_dim)
    parser.add_argument("--http", metavar="PORT", type=int, default=None,
                        help="serve HTTP on this port instead of stdio")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    config = AdapterConfig(
        backend=args.backend,
        segmentation_checkpoint=args.checkpoint,
        device=args.device,
        batch_size=args.batch_size,
        embed_dim=args.embed_dim,
    )
    try:
        backend = build_backend(config)
    except Exception as exc:
        print(f"fatal: cannot initialize backend: {exc}", file=sys.stderr)
        return 1

    from .protocol import serve_http, serve_stdio

    if args.http is not None:
        server = serve_http(backend, args.host, args.http)
        print(f"serving HTTP on {args.host}:{args.http}", file=sys.stderr)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            server.shutdown()
        return 0
    serve_stdio(backend)
    return 0


if __name__ == "__main__":
    sys.exit(main())
