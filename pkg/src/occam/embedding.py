"""Masked crop preparation and feature extraction.

Crops are masked to the candidate's pixels inside the tight box, scaled
onto a black square canvas, and handed to an embedder. The baseline
embedder is a deterministic color-and-shape descriptor so the pipeline
runs without any neural backend; wire embedders plug in through
:class:`occam.wire.WireEmbedder`.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, runtime_checkable

import numpy as np
from PIL import Image as PILImage

from .imaging import BBox, crop_and_pad, require_rgb8
from .maskproc import CandidateInstance

HIST_BINS = 16
THUMB_SIDE = 16
BASELINE_DIM = 3 * HIST_BINS + THUMB_SIDE * THUMB_SIDE * 3

# Feature vectors are normalized to this fixed norm rather than to 1 so
# that distances live on the same scale as deep-backbone features and the
# stock threshold schedules stay meaningful.
FEATURE_NORM = 10.0


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    candidate_id: int


@runtime_checkable
class Embedder(Protocol):
    dim: int
    deterministic: bool

    def embed(self, crop: np.ndarray) -> np.ndarray: ...


def prepare_crop(img: np.ndarray, cand: CandidateInstance, target: int) -> np.ndarray:
    """Masked, aspect-preserving, zero-padded square crop of one candidate."""
    arr = require_rgb8(img)
    box = cand.bbox
    region = arr[box.y0 : box.y1, box.x0 : box.x1].copy()
    region[~cand.mask.pixels[box.y0 : box.y1, box.x0 : box.x1]] = 0
    return crop_and_pad(region, BBox(0, 0, box.width, box.height), target)


class BaselineEmbedder:
    """Color histograms plus a small thumbnail, at a fixed feature norm.

    Per-channel 16-bin histograms are taken over the crop's non-black
    pixels (the masked object), normalized to fractions; the 16x16 RGB
    thumbnail is scaled to [0, 1]. An all-black crop embeds to the zero
    vector.
    """

    dim = BASELINE_DIM
    deterministic = True

    def embed(self, crop: np.ndarray) -> np.ndarray:
        arr = require_rgb8(crop)
        masked = np.any(arr != 0, axis=2)
        hist = np.zeros(3 * HIST_BINS, dtype=np.float64)
        n = int(np.count_nonzero(masked))
        if n > 0:
            values = arr[masked]
            for ch in range(3):
                counts = np.bincount(values[:, ch] // (256 // HIST_BINS), minlength=HIST_BINS)
                hist[ch * HIST_BINS : (ch + 1) * HIST_BINS] = counts / n
        thumb = np.asarray(
            PILImage.fromarray(arr).resize((THUMB_SIDE, THUMB_SIDE), PILImage.BILINEAR),
            dtype=np.float64,
        )
        vec = np.concatenate([hist, thumb.ravel() / 255.0])
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            return vec
        return vec * (FEATURE_NORM / norm)


def embed(embedder: Embedder, crop: np.ndarray) -> np.ndarray:
    """Embed one crop, validating the embedder contract."""
    vec = embedder.embed(crop)
    arr = np.asarray(vec, dtype=np.float64)
    if arr.shape != (embedder.dim,):
        raise ValueError(f"embedder returned shape {arr.shape}, declared dim {embedder.dim}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("embedder returned non-finite values")
    return arr


class CropCache:
    """Feature cache keyed by crop content hash; optionally disk-backed."""

    def __init__(self, directory=None):
        self._mem: dict[str, np.ndarray] = {}
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(crop: np.ndarray) -> str:
        return hashlib.sha1(np.ascontiguousarray(crop).tobytes()).hexdigest()

    def get(self, key: str) -> np.ndarray | None:
        if key in self._mem:
            return self._mem[key]
        if self.directory:
            path = self.directory / f"{key}.f32"
            if path.exists():
                vec = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
                self._mem[key] = vec
                return vec
        return None

    def put(self, key: str, vec: np.ndarray) -> None:
        self._mem[key] = vec
        if self.directory:
            (self.directory / f"{key}.f32").write_bytes(vec.astype("<f4").tobytes())


def embed_candidates(
    img: np.ndarray,
    candidates: list[CandidateInstance],
    embedder: Embedder,
    target: int,
    cache: CropCache | None = None,
) -> list[FeatureVector]:
    features = []
    for cand in candidates:
        crop = prepare_crop(img, cand, target)
        vec = None
        key = None
        if cache is not None:
            key = cache.key(crop)
            vec = cache.get(key)
        if vec is None:
            vec = embed(embedder, crop)
            if cache is not None:
                cache.put(key, vec)
        features.append(FeatureVector(values=vec, candidate_id=cand.id))
    return features


def dump_features(features: list[FeatureVector], prefix) -> Path:
    """Write features as little-endian f32 binary plus a JSON index."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    bin_path = prefix.with_suffix(".bin")
    index_path = prefix.with_suffix(".json")
    dim = len(features[0].values) if features else 0
    with open(bin_path, "wb") as fh:
        for fv in features:
            fh.write(np.asarray(fv.values, dtype="<f4").tobytes())
    index = {
        "dim": dim,
        "count": len(features),
        "dtype": "<f4",
        "bin": bin_path.name,
        "entries": [{"id": fv.candidate_id, "offset": i} for i, fv in enumerate(features)],
    }
    index_path.write_text(json.dumps(index, indent=2))
    return index_path


def load_features(path) -> list[FeatureVector]:
    from .errors import DataError

    path = Path(path)
    if path.suffix != ".json":
        path = path.with_suffix(".json")
    try:
        index = json.loads(path.read_text())
        dim = int(index["dim"])
        raw = (path.parent / index["bin"]).read_bytes()
        flat = np.frombuffer(raw, dtype=index.get("dtype", "<f4")).astype(np.float64)
    except (OSError, KeyError, ValueError) as exc:
        raise DataError(f"cannot load feature dump {path}: {exc}") from exc
    if dim == 0:
        return []
    if flat.size != dim * int(index["count"]):
        raise DataError(f"feature dump {path} has {flat.size} values, expected {dim}x{index['count']}")
    vectors = flat.reshape(-1, dim)
    return [
        FeatureVector(values=vectors[e["offset"]], candidate_id=int(e["id"]))
        for e in index["entries"]
    ]
