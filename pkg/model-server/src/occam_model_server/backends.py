"""Model backends behind the protocol layer.

``StubBackend`` is checkpoint-free: it segments same-colored blobs and
embeds patches with a seeded hash projection, which keeps the protocol
fully testable on any machine. The reference backend (SAM2 + ResNet-50)
lives in :mod:`occam_model_server.reference` behind guarded imports.
"""
from __future__ import annotations

import hashlib
from typing import Protocol

import numpy as np

from .config import AdapterConfig


class Backend(Protocol):
    embed_dim: int
    deterministic: bool
    meta: dict

    def segment(self, image: np.ndarray, points: list[tuple[int, int]]) -> list[tuple[int, np.ndarray, float]]:
        """Per point: up to three (point_index, bool mask, score) entries."""
        ...

    def embed(self, patch: np.ndarray) -> np.ndarray: ...


class StubBackend:
    deterministic = True

    def __init__(self, config: AdapterConfig):
        self.embed_dim = config.embed_dim
        self.max_masks_per_point = config.max_masks_per_point
        self.meta = {"backend": "stub", "embed_dim": self.embed_dim}

    def segment(self, image, points):
        from scipy import ndimage

        fg = np.any(image != 0, axis=2)
        labels, n = ndimage.label(fg, structure=np.ones((3, 3)))
        results = []
        for idx, (x, y) in enumerate(points):
            label = labels[int(y), int(x)]
            if label > 0:
                results.append((idx, labels == label, 0.9))
        return results

    def embed(self, patch):
        digest = hashlib.sha256(np.ascontiguousarray(patch).tobytes()).digest()
        rng = np.random.default_rng(np.frombuffer(digest, dtype=np.uint64))
        return rng.normal(size=self.embed_dim)


def build_backend(config: AdapterConfig) -> Backend:
    if config.backend == "stub":
        return StubBackend(config)
    if config.backend == "reference":
        from .reference import ReferenceBackend

        return ReferenceBackend(config)
    raise ValueError(f"unknown backend {config.backend!r}")
