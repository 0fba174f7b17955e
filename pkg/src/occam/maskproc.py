"""Turns raw provider masks into the final candidate object masks.

Pipeline order: major-component extraction on every raw mask, greedy IoU
deduplication, then size and sliver filters. Extracting components first
lets fragments participate in dedup, so a major component that duplicates
an independently produced mask is still collapsed with it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .imaging import BBox, BinaryMask, connected_components, iou
from .prompting import RawMaskSet


@dataclass(frozen=True)
class FilterConfig:
    iou_dup_threshold: float = 0.1
    max_area_frac: float = 0.5
    min_bbox_side: int = 2

    def __post_init__(self):
        if not (0.0 < self.iou_dup_threshold <= 1.0):
            raise ValueError(f"iou_dup_threshold must be in (0, 1], got {self.iou_dup_threshold}")
        if not (0.0 < self.max_area_frac <= 1.0):
            raise ValueError(f"max_area_frac must be in (0, 1], got {self.max_area_frac}")


@dataclass(frozen=True)
class Provenance:
    image_id: str | None = None
    point_index: int = -1
    slot: int = 0
    tile: tuple[int, int] | None = None


@dataclass
class CandidateInstance:
    id: int
    mask: BinaryMask
    bbox: BBox
    score: float = 1.0
    source: Provenance = field(default_factory=Provenance)


def split_major_component(m: BinaryMask) -> BinaryMask:
    """Largest 8-connected component; ties by (min y, min x)."""
    comps = connected_components(m)
    if not comps:
        raise ValueError("cannot take major component of an empty mask")
    return comps[0]


def _pair_iou(a: BinaryMask, b: BinaryMask) -> float:
    """IoU with bbox pruning: disjoint boxes mean disjoint masks, and the
    intersection only needs the box-overlap window."""
    if a.bbox is None or b.bbox is None:
        return 0.0
    x0 = max(a.bbox.x0, b.bbox.x0)
    y0 = max(a.bbox.y0, b.bbox.y0)
    x1 = min(a.bbox.x1, b.bbox.x1)
    y1 = min(a.bbox.y1, b.bbox.y1)
    if x0 >= x1 or y0 >= y1:
        return 0.0
    inter = int(np.count_nonzero(a.pixels[y0:y1, x0:x1] & b.pixels[y0:y1, x0:x1]))
    union = a.area + b.area - inter
    return inter / union if union else 0.0


def _greedy_retain_indices(
    masks: list[BinaryMask],
    scores: list[float],
    threshold: float,
    fixed: Sequence[BinaryMask] = (),
) -> list[int]:
    """Indices retained by the greedy scan: descending score, ties by
    insertion order; a mask is dropped if its IoU with any fixed mask or
    any earlier-retained mask exceeds the threshold."""
    order = sorted(range(len(masks)), key=lambda i: (-scores[i], i))
    retained: list[int] = []
    for i in order:
        if all(_pair_iou(masks[i], f) <= threshold for f in fixed) and all(
            _pair_iou(masks[i], masks[j]) <= threshold for j in retained
        ):
            retained.append(i)
    return retained


def dedup_masks(
    masks: list[tuple[BinaryMask, float]], cfg: FilterConfig
) -> list[tuple[BinaryMask, float]]:
    """Greedy duplicate suppression.

    Scans masks by descending score (ties keep insertion order) and drops
    any mask whose IoU with an already-retained one exceeds the threshold.
    """
    shapes = {m.shape for m, _ in masks}
    if len(shapes) > 1:
        raise ValueError(f"mask dimensions differ: {sorted(shapes)}")
    kept = _greedy_retain_indices(
        [m for m, _ in masks], [s for _, s in masks], cfg.iou_dup_threshold
    )
    return [masks[i] for i in kept]


def accumulate_non_duplicates(
    retained: list[CandidateInstance],
    incoming: list[CandidateInstance],
    cfg: FilterConfig,
) -> list[CandidateInstance]:
    """Greedy dedup of incoming candidates against a fixed retained set.

    The retained set itself is never reduced; incoming candidates enter
    only when they duplicate neither it nor an earlier accepted one.
    """
    kept = _greedy_retain_indices(
        [c.mask for c in incoming],
        [c.score for c in incoming],
        cfg.iou_dup_threshold,
        fixed=[r.mask for r in retained],
    )
    return [incoming[i] for i in kept]


def passes_size_filters(mask: BinaryMask, image_area: int, cfg: FilterConfig) -> bool:
    if mask.is_empty:
        return False
    if mask.area > cfg.max_area_frac * image_area:
        return False
    box = mask.bbox
    return box.width >= cfg.min_bbox_side and box.height >= cfg.min_bbox_side


def postprocess(raw: RawMaskSet, img: np.ndarray, cfg: FilterConfig) -> list[CandidateInstance]:
    """Raw masks -> deduplicated, size-filtered candidate instances."""
    h, w = img.shape[:2]
    if (raw.width, raw.height) != (w, h):
        raise ValueError(f"raw mask set sized {raw.width}x{raw.height} for image {w}x{h}")
    majors: list[tuple[BinaryMask, float, int]] = []
    for i, rm in enumerate(raw.masks):
        if rm.mask.is_empty:
            continue
        majors.append((split_major_component(rm.mask), rm.score, i))

    kept = _greedy_retain_indices(
        [m for m, _, _ in majors], [s for _, s, _ in majors], cfg.iou_dup_threshold
    )

    image_area = w * h
    candidates = []
    for i in kept:
        mask, score, src = majors[i]
        if not passes_size_filters(mask, image_area, cfg):
            continue
        rm = raw.masks[src]
        candidates.append(
            CandidateInstance(
                id=len(candidates),
                mask=mask,
                bbox=mask.bbox,
                score=score,
                source=Provenance(point_index=rm.point_index, slot=rm.slot),
            )
        )
    return candidates


def candidates_from_raw(raw: RawMaskSet) -> list[CandidateInstance]:
    """Ablation path: wrap raw masks as candidates without any filtering."""
    candidates = []
    for rm in raw.masks:
        if rm.mask.is_empty:
            continue
        candidates.append(
            CandidateInstance(
                id=len(candidates),
                mask=rm.mask,
                bbox=rm.mask.bbox,
                score=rm.score,
                source=Provenance(point_index=rm.point_index, slot=rm.slot),
            )
        )
    return candidates
