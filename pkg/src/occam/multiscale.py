"""Multiscale refinement: re-run the pipeline on a 3x3 tiling when the
full-scale pass yields too few candidates, accumulating translated masks.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ProviderError
from .imaging import BinaryMask
from .maskproc import (
    CandidateInstance,
    FilterConfig,
    Provenance,
    accumulate_non_duplicates,
    candidates_from_raw,
    passes_size_filters,
    postprocess,
)
from .prompting import SegmentationProvider, generate_seed_grid, segment

log = logging.getLogger(__name__)

TILE_GRID = 3


@dataclass(frozen=True)
class MultiscaleConfig:
    min_candidates: int = 10
    max_depth: int = 1

    def __post_init__(self):
        if self.min_candidates < 1:
            raise ValueError("min_candidates must be >= 1")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")


def run_base(
    img: np.ndarray,
    provider: SegmentationProvider,
    spacing: int,
    filter_cfg: FilterConfig,
    mask_processing: bool = True,
    image_id: str | None = None,
) -> list[CandidateInstance]:
    """One full pass at a single scale: grid, segment, postprocess."""
    h, w = img.shape[:2]
    points = generate_seed_grid(w, h, spacing)
    raw = segment(provider, img, points, image_id=image_id)
    if mask_processing:
        return postprocess(raw, img, filter_cfg)
    return candidates_from_raw(raw)


def _tile_bounds(extent: int) -> list[tuple[int, int]]:
    """Three spans covering [0, extent); the last one absorbs the remainder."""
    step = extent // TILE_GRID
    if step == 0:
        return [(0, extent)]
    bounds = [(i * step, (i + 1) * step) for i in range(TILE_GRID - 1)]
    bounds.append(((TILE_GRID - 1) * step, extent))
    return bounds


def _translate(cand: CandidateInstance, x_off: int, y_off: int, width: int, height: int, tile: tuple[int, int]) -> CandidateInstance:
    full = np.zeros((height, width), dtype=bool)
    th, tw = cand.mask.shape
    full[y_off : y_off + th, x_off : x_off + tw] = cand.mask.pixels
    mask = BinaryMask(full)
    return CandidateInstance(
        id=-1,
        mask=mask,
        bbox=mask.bbox,
        score=cand.score,
        source=Provenance(
            image_id=cand.source.image_id,
            point_index=cand.source.point_index,
            slot=cand.source.slot,
            tile=tile,
        ),
    )


def refine_multiscale(
    img: np.ndarray,
    provider: SegmentationProvider,
    spacing: int,
    filter_cfg: FilterConfig,
    ms_cfg: MultiscaleConfig,
    mask_processing: bool = True,
    image_id: str | None = None,
    _depth: int = 0,
) -> list[CandidateInstance]:
    """Base pass plus, if it found too few candidates, a 3x3 tile pass.

    Tile candidates are translated into the full frame and accumulated onto
    the base set: the base candidates are always kept, and tile candidates
    are greedily admitted unless they duplicate anything already retained.
    With ``max_depth`` 0 this is exactly the base pass.
    """
    base = run_base(img, provider, spacing, filter_cfg, mask_processing, image_id)
    if len(base) >= ms_cfg.min_candidates or _depth >= ms_cfg.max_depth:
        return base

    h, w = img.shape[:2]
    incoming: list[CandidateInstance] = []
    for r, (y0, y1) in enumerate(_tile_bounds(h)):
        for c, (x0, x1) in enumerate(_tile_bounds(w)):
            tile_id = None if image_id is None else f"{image_id}#tile{r}{c}d{_depth + 1}"
            try:
                tile_cands = refine_multiscale(
                    img[y0:y1, x0:x1],
                    provider,
                    spacing,
                    filter_cfg,
                    ms_cfg,
                    mask_processing,
                    image_id=tile_id,
                    _depth=_depth + 1,
                )
            except ProviderError as exc:
                log.warning("tile (%d,%d) failed (%s); keeping base candidates only", r, c, exc)
                return base
            for cand in tile_cands:
                incoming.append(_translate(cand, x0, y0, w, h, tile=(r, c)))

    if mask_processing:
        image_area = w * h
        incoming = [c for c in incoming if passes_size_filters(c.mask, image_area, filter_cfg)]
        accepted = accumulate_non_duplicates(base, incoming, filter_cfg)
    else:
        accepted = incoming
    if not accepted:
        return base
    merged = []
    for cand in base + accepted:
        merged.append(
            CandidateInstance(
                id=len(merged), mask=cand.mask, bbox=cand.bbox, score=cand.score, source=cand.source
            )
        )
    return merged
