"""Visualization: tight boxes on counted objects, one color per cluster."""
from __future__ import annotations

import numpy as np
from PIL import Image as PILImage, ImageDraw

from .pipeline import CountResult

PALETTE = [
    (230, 25, 75),
    (60, 180, 75),
    (255, 225, 25),
    (0, 130, 200),
    (245, 130, 48),
    (145, 30, 180),
    (70, 240, 240),
    (240, 50, 230),
    (210, 245, 60),
    (250, 190, 212),
    (0, 128, 128),
    (220, 190, 255),
    (170, 110, 40),
    (255, 250, 200),
    (128, 0, 0),
    (170, 255, 195),
]


def render_clusters(img: np.ndarray, result: CountResult) -> np.ndarray:
    """Draw each candidate's tight box colored by its cluster rank."""
    canvas = PILImage.fromarray(img.copy())
    draw = ImageDraw.Draw(canvas)
    by_id = {c.id: c for c in result.candidates}
    for rank, cluster in enumerate(result.clusters):
        color = PALETTE[rank % len(PALETTE)]
        for member in cluster.members:
            box = by_id[member].bbox
            draw.rectangle([box.x0, box.y0, box.x1 - 1, box.y1 - 1], outline=color, width=2)
    return np.asarray(canvas)
