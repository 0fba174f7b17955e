"""Seed-point grid generation and segmentation-provider orchestration.

A provider turns (image, points) into up to three scored masks per point.
Three implementations ship here or in :mod:`occam.wire`:

* ``MockProvider`` finds same-colored blobs analytically, for synthetic
  scenes and tests;
* ``FileProvider`` replays responses recorded to disk;
* ``WireSegmentationProvider`` talks the newline-JSON / HTTP protocol.
"""
from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import DataError, ProtocolError
from .imaging import BinaryMask, connected_components, require_rgb8, rle_decode, RleMask

log = logging.getLogger(__name__)

MAX_MASKS_PER_POINT = 3


@dataclass(frozen=True)
class SeedPoint:
    x: int
    y: int


@dataclass(frozen=True)
class RawMask:
    """One provider mask with its provenance (seed index, output slot)."""

    mask: BinaryMask
    score: float
    point_index: int
    slot: int


@dataclass
class RawMaskSet:
    width: int
    height: int
    points: list[SeedPoint]
    masks: list[RawMask] = field(default_factory=list)

    def per_point_counts(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for rm in self.masks:
            counts[rm.point_index] = counts.get(rm.point_index, 0) + 1
        return counts


@runtime_checkable
class SegmentationProvider(Protocol):
    max_masks_per_point: int
    deterministic: bool
    serialized: bool

    def segment(
        self, img: np.ndarray, points: Sequence[SeedPoint], image_id: str | None = None
    ) -> RawMaskSet: ...


def _axis_coords(extent: int, spacing: int) -> list[int]:
    if extent < spacing:
        return [extent // 2]
    offset = spacing // 2
    return list(range(offset, extent, spacing))


def generate_seed_grid(width: int, height: int, spacing: int) -> list[SeedPoint]:
    """Regular grid of cell-center points, row-major.

    Images smaller than the spacing along an axis fall back to the center
    coordinate on that axis, so every image yields at least one point.
    """
    if width < 1 or height < 1:
        raise ValueError(f"zero-sized image {width}x{height}")
    if spacing < 1:
        raise ValueError("spacing must be >= 1")
    xs = _axis_coords(width, spacing)
    ys = _axis_coords(height, spacing)
    return [SeedPoint(x, y) for y in ys for x in xs]


def segment(
    provider: SegmentationProvider,
    img: np.ndarray,
    points: Sequence[SeedPoint],
    image_id: str | None = None,
) -> RawMaskSet:
    """Query the provider and validate its output against the contract."""
    arr = require_rgb8(img)
    h, w = arr.shape[:2]
    for p in points:
        if not (0 <= p.x < w and 0 <= p.y < h):
            raise ValueError(f"seed point {p} outside image {w}x{h}")
    raw = provider.segment(arr, list(points), image_id=image_id)
    if (raw.width, raw.height) != (w, h):
        raise ProtocolError(f"provider returned set sized {raw.width}x{raw.height} for {w}x{h}")
    counts = raw.per_point_counts()
    for idx, n in counts.items():
        if not (0 <= idx < len(points)):
            raise ProtocolError(f"mask references unknown point index {idx}")
        if n > MAX_MASKS_PER_POINT:
            raise ProtocolError(f"point {idx} received {n} masks (> {MAX_MASKS_PER_POINT})")
    for rm in raw.masks:
        if rm.mask.shape != (h, w):
            raise ProtocolError(f"mask shape {rm.mask.shape} does not match image {h, w}")
    return raw


class MockProvider:
    """Analytic provider: a seed on a colored blob returns that blob's mask.

    Blobs are 8-connected components of non-background pixels of the given
    image itself, so the provider behaves consistently on crops and tiles.
    ``min_rel_area`` hides blobs smaller than the given fraction of the
    image, which makes tiny objects visible only at tile scale.
    """

    max_masks_per_point = MAX_MASKS_PER_POINT
    deterministic = True
    serialized = False

    def __init__(self, background: tuple[int, int, int] = (0, 0, 0), min_rel_area: float = 0.0):
        self.background = np.asarray(background, dtype=np.uint8)
        self.min_rel_area = min_rel_area

    def segment(self, img, points, image_id=None) -> RawMaskSet:
        arr = require_rgb8(img)
        h, w = arr.shape[:2]
        foreground = BinaryMask(np.any(arr != self.background, axis=2))
        blobs = [
            c
            for c in connected_components(foreground)
            if c.area >= self.min_rel_area * w * h
        ]
        result = RawMaskSet(width=w, height=h, points=list(points))
        for idx, p in enumerate(points):
            for blob in blobs:
                if blob.pixels[p.y, p.x]:
                    result.masks.append(RawMask(mask=blob, score=1.0, point_index=idx, slot=0))
                    break
        return result


def grid_key(width: int, height: int, points: Sequence[SeedPoint], pixels: np.ndarray) -> str:
    """Key identifying one segment request: dims, content hash, point list."""
    digest = hashlib.sha1()
    digest.update(f"{width}x{height}|".encode())
    digest.update(hashlib.sha1(np.ascontiguousarray(pixels).tobytes()).digest())
    digest.update(";".join(f"{p.x},{p.y}" for p in points).encode())
    return digest.hexdigest()


def _document_name(base_id: str) -> str:
    return hashlib.sha1(base_id.encode()).hexdigest() + ".json"


class FileProvider:
    """Replays recorded masks: one JSON document per base image.

    Documents are located by the hash of the image id (tile ids such as
    ``path#tile12`` share their base image's document) and hold one entry
    per segment request, keyed by :func:`grid_key`.
    """

    max_masks_per_point = MAX_MASKS_PER_POINT
    deterministic = True
    serialized = False

    def __init__(self, root):
        self.root = Path(root)
        if not self.root.is_dir():
            raise DataError(f"file provider root {self.root} is not a directory")
        self._docs: dict[str, dict] = {}

    def _load_doc(self, base_id: str) -> dict:
        if base_id not in self._docs:
            path = self.root / _document_name(base_id)
            if not path.exists():
                raise DataError(f"no recorded masks for image {base_id!r} under {self.root}")
            try:
                self._docs[base_id] = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise DataError(f"malformed mask document {path}: {exc}") from exc
        return self._docs[base_id]

    def segment(self, img, points, image_id=None) -> RawMaskSet:
        if image_id is None:
            raise DataError("file provider requires an image id")
        arr = require_rgb8(img)
        h, w = arr.shape[:2]
        base_id = image_id.split("#", 1)[0]
        doc = self._load_doc(base_id)
        key = grid_key(w, h, points, arr)
        entry = doc.get("entries", {}).get(key)
        if entry is None:
            raise DataError(f"no recorded entry for request {key} of image {base_id!r}")
        result = RawMaskSet(width=w, height=h, points=list(points))
        for item in entry["masks"]:
            try:
                rle = RleMask.from_json(item["rle"])
                mask = rle_decode(rle)
                result.masks.append(
                    RawMask(
                        mask=mask,
                        score=float(item["score"]),
                        point_index=int(item["point_index"]),
                        slot=int(item.get("slot", 0)),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise DataError(f"malformed recorded mask for {base_id!r}: {exc}") from exc
        return result


class RecordingProvider:
    """Wraps a provider and records every response for later replay."""

    def __init__(self, inner: SegmentationProvider, root):
        from .imaging import rle_encode

        self._rle_encode = rle_encode
        self.inner = inner
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.max_masks_per_point = inner.max_masks_per_point
        self.deterministic = inner.deterministic
        self.serialized = inner.serialized
        self._index: dict[str, str] = {}

    def segment(self, img, points, image_id=None) -> RawMaskSet:
        raw = self.inner.segment(img, points, image_id=image_id)
        if image_id is None:
            log.warning("recording skipped: no image id for this request")
            return raw
        base_id = image_id.split("#", 1)[0]
        name = _document_name(base_id)
        path = self.root / name
        doc = json.loads(path.read_text()) if path.exists() else {"image": base_id, "entries": {}}
        key = grid_key(raw.width, raw.height, points, img)
        doc["entries"][key] = {
            "masks": [
                {
                    "point_index": rm.point_index,
                    "slot": rm.slot,
                    "score": rm.score,
                    "rle": self._rle_encode(rm.mask).to_json(),
                }
                for rm in raw.masks
            ]
        }
        path.write_text(json.dumps(doc))
        self._index[base_id] = name
        index_path = self.root / "index.json"
        existing = json.loads(index_path.read_text()) if index_path.exists() else {}
        existing.update(self._index)
        index_path.write_text(json.dumps(existing, indent=2, sort_keys=True))
        return raw
