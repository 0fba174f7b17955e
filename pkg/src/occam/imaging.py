"""Raster and binary-mask primitives shared by the whole pipeline.

Images are HxWx3 uint8 numpy arrays (RGB). Masks are wrapped in
:class:`BinaryMask`, which caches area and tight bounding box.
Connectivity for components is 8-connected throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

# Object blobs in natural images touch diagonally, so components use the
# full 3x3 neighborhood.
CONNECTIVITY_STRUCTURE = np.ones((3, 3), dtype=bool)


def require_rgb8(img: np.ndarray) -> np.ndarray:
    """Validate an RGB uint8 image array and return it."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected HxWx3 uint8 image, got shape {arr.shape} dtype {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return arr


def new_canvas(width: int, height: int) -> np.ndarray:
    """All-black RGB canvas."""
    return np.zeros((height, width, 3), dtype=np.uint8)


def load_image(path) -> np.ndarray:
    from .errors import DataError

    try:
        with PILImage.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def save_png(img: np.ndarray, path) -> None:
    PILImage.fromarray(require_rgb8(img)).save(path, format="PNG")


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, inclusive-exclusive: [x0, x1) x [y0, y1)."""

    x0: int
    y0: int
    x1: int
    y1: int

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate box {self}")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError(f"negative box origin {self}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0

    def to_list(self) -> list[int]:
        return [self.x0, self.y0, self.x1, self.y1]


class BinaryMask:
    """A pixel set over an image grid with cached area and tight bbox.

    The pixel array is stored read-only; ``bbox`` is None for an empty mask.
    """

    __slots__ = ("pixels", "area", "bbox")

    def __init__(self, pixels: np.ndarray):
        px = np.ascontiguousarray(pixels, dtype=bool)
        if px.ndim != 2:
            raise ValueError(f"mask must be 2-D, got shape {px.shape}")
        px.setflags(write=False)
        self.pixels = px
        self.area = int(np.count_nonzero(px))
        if self.area == 0:
            self.bbox = None
        else:
            rows = np.flatnonzero(px.any(axis=1))
            cols = np.flatnonzero(px.any(axis=0))
            self.bbox = BBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    @property
    def is_empty(self) -> bool:
        return self.area == 0

    def __repr__(self):
        return f"BinaryMask({self.width}x{self.height}, area={self.area})"

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))


def _require_same_shape(a: BinaryMask, b: BinaryMask) -> None:
    if a.shape != b.shape:
        raise ValueError(f"mask dimension mismatch: {a.shape} vs {b.shape}")


def iou(a: BinaryMask, b: BinaryMask) -> float:
    """Intersection over union of two same-sized masks; 0 for empty union."""
    _require_same_shape(a, b)
    inter = int(np.count_nonzero(a.pixels & b.pixels))
    union = a.area + b.area - inter
    if union == 0:
        return 0.0
    return inter / union


def connected_components(m: BinaryMask) -> list[BinaryMask]:
    """8-connected components, largest first; ties by (min y, min x)."""
    if m.is_empty:
        return []
    labels, n = ndimage.label(m.pixels, structure=CONNECTIVITY_STRUCTURE)
    comps = [BinaryMask(labels == k) for k in range(1, n + 1)]
    comps.sort(key=lambda c: (-c.area, c.bbox.y0, c.bbox.x0))
    return comps


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def crop_and_pad(img: np.ndarray, box: BBox, target: int) -> np.ndarray:
    """Scale the box region onto a target x target black canvas.

    The region is resized by target / max(boxW, boxH) with bilinear
    resampling, preserving aspect ratio, and placed at the top-left.
    """
    arr = require_rgb8(img)
    if target < 1:
        raise ValueError("target size must be >= 1")
    h, w = arr.shape[:2]
    if box.x1 > w or box.y1 > h:
        raise ValueError(f"box {box} exceeds image {w}x{h}")
    region = arr[box.y0 : box.y1, box.x0 : box.x1]
    scale = target / max(box.width, box.height)
    out_w = max(1, _round_half_up(scale * box.width))
    out_h = max(1, _round_half_up(scale * box.height))
    if (out_w, out_h) != (box.width, box.height):
        resized = np.asarray(
            PILImage.fromarray(region).resize((out_w, out_h), PILImage.BILINEAR)
        )
    else:
        resized = region
    canvas = np.zeros((target, target, 3), dtype=np.uint8)
    canvas[:out_h, :out_w] = resized
    return canvas


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded mask: column-major runs, background first."""

    width: int
    height: int
    counts: tuple[int, ...]

    def to_json(self) -> dict:
        return {"size": [self.height, self.width], "counts": list(self.counts)}

    @classmethod
    def from_json(cls, obj: dict) -> "RleMask":
        try:
            h, w = obj["size"]
            counts = tuple(int(c) for c in obj["counts"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed RLE object: {obj!r}") from exc
        return cls(width=int(w), height=int(h), counts=counts)


def rle_encode(m: BinaryMask) -> RleMask:
    flat = m.pixels.flatten(order="F")
    if flat.size == 0:
        return RleMask(m.width, m.height, (0,))
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(m.width, m.height, tuple(int(c) for c in counts))


def rle_decode(r: RleMask) -> BinaryMask:
    total = sum(r.counts)
    if total != r.width * r.height:
        raise ValueError(
            f"RLE runs sum to {total}, expected {r.width * r.height} for {r.width}x{r.height}"
        )
    if any(c < 0 for c in r.counts):
        raise ValueError("negative run length")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in r.counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return BinaryMask(flat.reshape((r.height, r.width), order="F"))
