"""Client for the model wire protocol.

Two transports carry the same JSON messages:

* newline-delimited JSON over a subprocess's stdin/stdout (default), one
  request in flight at a time;
* HTTP POST to ``<base>/v1/<op>``.

Ops: ``hello`` (capability handshake), ``segment`` (point-prompted masks),
``embed`` (feature vector for a patch).
"""
from __future__ import annotations

import base64
import io
import itertools
import json
import logging
import shlex
import subprocess
import threading
import time

import numpy as np
import requests
from PIL import Image as PILImage

from .errors import ProtocolError, ProviderError, RetryableProviderError
from .imaging import RleMask, require_rgb8, rle_decode
from .prompting import MAX_MASKS_PER_POINT, RawMask, RawMaskSet

log = logging.getLogger(__name__)


def png_b64(img: np.ndarray) -> str:
    buf = io.BytesIO()
    PILImage.fromarray(require_rgb8(img)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class WireClient:
    """Shared transport for wire providers and embedders."""

    def __init__(self, target: str, timeout: float = 300.0, max_retries: int = 2):
        self.target = target
        self.timeout = timeout
        self.max_retries = max_retries
        self.is_http = target.startswith(("http://", "https://"))
        self._ids = itertools.count(1)
        self._lock = threading.Lock()
        self._proc: subprocess.Popen | None = None
        self._caps: dict | None = None
        if not self.is_http:
            self._spawn()

    def _spawn(self) -> None:
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.target),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProviderError(f"cannot start wire process {self.target!r}: {exc}") from exc

    @property
    def serialized(self) -> bool:
        return not self.is_http

    def close(self) -> None:
        if self._proc is not None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=10)
            except (OSError, subprocess.TimeoutExpired):
                self._proc.kill()
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _roundtrip_stdio(self, payload: dict) -> dict:
        proc = self._proc
        if proc is None or proc.poll() is not None:
            raise RetryableProviderError(f"wire process {self.target!r} is not running")
        try:
            proc.stdin.write(json.dumps(payload) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
        except (OSError, BrokenPipeError) as exc:
            raise RetryableProviderError(f"wire transport failed: {exc}") from exc
        if not line:
            raise RetryableProviderError(f"wire process {self.target!r} closed its output")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON from wire process: {line[:200]!r}") from exc

    def _roundtrip_http(self, payload: dict) -> dict:
        op = payload["op"]
        url = self.target.rstrip("/") + "/v1/" + op
        try:
            resp = requests.post(url, json=payload, timeout=self.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise RetryableProviderError(f"HTTP transport to {url} failed: {exc}") from exc
        if resp.status_code >= 500:
            raise RetryableProviderError(f"{url} returned {resp.status_code}")
        if resp.status_code != 200:
            raise ProviderError(f"{url} returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()
        except ValueError as exc:
            raise ProtocolError(f"invalid JSON from {url}") from exc

    def request(self, op: str, payload: dict) -> dict:
        """Send one request, retrying transient transport failures."""
        attempt = 0
        while True:
            try:
                return self._request_once(op, payload)
            except RetryableProviderError:
                attempt += 1
                if attempt > self.max_retries:
                    raise
                log.warning("retrying %s (%d/%d) against %s", op, attempt, self.max_retries, self.target)
                if not self.is_http:
                    self.close()
                    self._spawn()
                    self._caps = None
                time.sleep(0.2 * attempt)

    def _request_once(self, op: str, payload: dict) -> dict:
        msg = {"id": f"req-{next(self._ids)}", "op": op, **payload}
        with self._lock:
            reply = self._roundtrip_stdio(msg) if not self.is_http else self._roundtrip_http(msg)
        if "error" in reply:
            err = reply["error"]
            message = err.get("message", str(err)) if isinstance(err, dict) else str(err)
            if isinstance(err, dict) and err.get("retryable"):
                raise RetryableProviderError(f"{op} failed remotely: {message}")
            raise ProviderError(f"{op} failed remotely: {message}")
        if op != "hello" and reply.get("id") != msg["id"]:
            raise ProtocolError(f"response id {reply.get('id')!r} does not match {msg['id']!r}")
        return reply

    def hello(self) -> dict:
        if self._caps is None:
            reply = self.request("hello", {})
            caps = reply.get("caps")
            if not isinstance(caps, dict):
                raise ProtocolError(f"handshake reply lacks caps: {reply!r}")
            self._caps = caps
        return self._caps


class WireSegmentationProvider:
    """Segmentation provider backed by a wire endpoint."""

    max_masks_per_point = MAX_MASKS_PER_POINT

    def __init__(self, client: WireClient):
        self.client = client
        caps = client.hello()
        if not caps.get("segment"):
            raise ProviderError(f"endpoint {client.target!r} does not support segment")
        self.deterministic = bool(caps.get("deterministic", False))
        self.serialized = client.serialized

    def segment(self, img, points, image_id=None) -> RawMaskSet:
        arr = require_rgb8(img)
        h, w = arr.shape[:2]
        reply = self.client.request(
            "segment",
            {"image": {"png_b64": png_b64(arr)}, "points": [[p.x, p.y] for p in points]},
        )
        items = reply.get("masks")
        if not isinstance(items, list):
            raise ProtocolError(f"segment reply lacks masks array: {reply!r}")
        result = RawMaskSet(width=w, height=h, points=list(points))
        slots: dict[int, int] = {}
        for item in items:
            try:
                idx = int(item["point_index"])
                mask = rle_decode(RleMask.from_json(item["rle"]))
                score = float(item["score"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"malformed mask item: {item!r}") from exc
            slot = slots.get(idx, 0)
            slots[idx] = slot + 1
            result.masks.append(RawMask(mask=mask, score=score, point_index=idx, slot=slot))
        return result


class WireEmbedder:
    """Embedder backed by a wire endpoint; dimension comes from the handshake."""

    def __init__(self, client: WireClient):
        self.client = client
        caps = client.hello()
        if not caps.get("embed"):
            raise ProviderError(f"endpoint {client.target!r} does not support embed")
        dim = caps.get("embed_dim")
        if not isinstance(dim, int) or dim < 1:
            raise ProtocolError(f"handshake declares invalid embed_dim: {dim!r}")
        self.dim = dim
        self.deterministic = bool(caps.get("deterministic", False))

    def embed(self, crop: np.ndarray) -> np.ndarray:
        reply = self.client.request("embed", {"patch": {"png_b64": png_b64(crop)}})
        vector = reply.get("vector")
        if not isinstance(vector, list):
            raise ProtocolError(f"embed reply lacks vector: {reply!r}")
        arr = np.asarray(vector, dtype=np.float64)
        if arr.shape != (self.dim,):
            raise ProtocolError(f"embed returned {arr.shape[0] if arr.ndim else '?'} dims, declared {self.dim}")
        if not np.all(np.isfinite(arr)):
            raise ProtocolError("embed returned non-finite values")
        return arr
