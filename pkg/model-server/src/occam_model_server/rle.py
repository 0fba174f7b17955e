"""Column-major background-first run-length codec for binary masks.

Matches the mask interchange format of the counting pipeline:
``{"size": [H, W], "counts": [...]}`` where the first run is background.
"""
from __future__ import annotations

import numpy as np


def encode(mask: np.ndarray) -> dict:
    grid = np.asarray(mask, dtype=bool)
    h, w = grid.shape
    flat = grid.flatten(order="F")
    if flat.size == 0:
        return {"size": [h, w], "counts": [0]}
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return {"size": [h, w], "counts": [int(c) for c in counts]}


def decode(obj: dict) -> np.ndarray:
    h, w = obj["size"]
    counts = obj["counts"]
    total = sum(counts)
    if total != h * w:
        raise ValueError(f"runs sum to {total}, expected {h * w}")
    flat = np.zeros(total, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape((h, w), order="F")
