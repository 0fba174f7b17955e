"""Adapter configuration."""
from __future__ import annotations

from dataclasses import dataclass

EMBED_DIM = 2048


@dataclass(frozen=True)
class AdapterConfig:
    backend: str = "reference"  # or "stub"
    segmentation_checkpoint: str = "facebook/sam2.1-hiera-large"
    embedder_id: str = "resnet50-imagenet"
    device: str = "auto"
    batch_size: int = 64
    embed_dim: int = EMBED_DIM
    max_masks_per_point: int = 3
