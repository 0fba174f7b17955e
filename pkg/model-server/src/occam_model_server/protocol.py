"""Wire-protocol endpoint: newline JSON over stdio, or HTTP POST /v1/<op>.

Requests carry PNG-encoded images; masks go back as column-major RLE.
Per-request model failures become ``{"id": ..., "error": {...}}`` replies
rather than killing the server.
"""
from __future__ import annotations

import base64
import io
import json
import logging
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
from PIL import Image

from . import rle
from .backends import Backend

log = logging.getLogger(__name__)


def decode_png(b64: str) -> np.ndarray:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
        return np.asarray(im.convert("RGB"))


def handle_request(msg: dict, backend: Backend) -> dict:
    req_id = msg.get("id")
    op = msg.get("op")
    try:
        if op == "hello":
            return {
                "id": req_id,
                "caps": {
                    "segment": True,
                    "embed": True,
                    "embed_dim": backend.embed_dim,
                    "deterministic": backend.deterministic,
                },
                "meta": backend.meta,
            }
        if op == "segment":
            image = decode_png(msg["image"]["png_b64"])
            points = [(int(x), int(y)) for x, y in msg["points"]]
            h, w = image.shape[:2]
            for x, y in points:
                if not (0 <= x < w and 0 <= y < h):
                    raise ValueError(f"point ({x}, {y}) outside image {w}x{h}")
            masks = [
                {"point_index": idx, "rle": rle.encode(mask), "score": score}
                for idx, mask, score in backend.segment(image, points)
            ]
            return {"id": req_id, "masks": masks}
        if op == "embed":
            patch = decode_png(msg["patch"]["png_b64"])
            vector = np.asarray(backend.embed(patch), dtype=np.float64)
            if vector.shape != (backend.embed_dim,):
                raise ValueError(f"backend produced {vector.shape}, declared {backend.embed_dim}")
            return {"id": req_id, "vector": vector.tolist()}
        return {"id": req_id, "error": {"message": f"unknown op {op!r}"}}
    except Exception as exc:
        log.exception("request %s failed", req_id)
        return {"id": req_id, "error": {"message": f"{type(exc).__name__}: {exc}"}}


def serve_stdio(backend: Backend) -> None:
    """Serialized loop: one request in flight per connection."""
    for line in sys.stdin:
        if not line.strip():
            continue
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"id": None, "error": {"message": f"invalid JSON request: {exc}"}}
        else:
            reply = handle_request(msg, backend)
        sys.stdout.write(json.dumps(reply) + "\n")
        sys.stdout.flush()


def serve_http(backend: Backend, host: str, port: int) -> ThreadingHTTPServer:
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            if not self.path.startswith("/v1/"):
                self.send_error(404)
                return
            op = self.path[len("/v1/") :]
            length = int(self.headers.get("Content-Length", 0))
            try:
                msg = json.loads(self.rfile.read(length) or b"{}")
            except json.JSONDecodeError:
                msg = {}
            msg.setdefault("op", op)
            reply = handle_request(msg, backend)
            payload = json.dumps(reply).encode()
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def log_message(self, fmt, *args):
            log.debug("http: " + fmt, *args)

    server = ThreadingHTTPServer((host, port), Handler)
    return server
