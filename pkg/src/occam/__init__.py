"""Class-agnostic, prior-free, multi-class object counting.

The pipeline prompts a segmentation provider on a dense seed grid,
filters the raw masks into candidate object instances, embeds masked
crops, and groups the embeddings with a threshold-gated first-neighbor
clustering variant; cluster sizes are the per-class counts.
"""

__version__ = "0.1.0"

from .config import PipelineConfig, from_profile
from .evaluation import GroundTruth, MetricsReport
from .finch import Cluster, ThresholdSchedule, finch_threshold_cluster, original_finch_level0
from .imaging import BBox, BinaryMask, iou
from .maskproc import CandidateInstance, FilterConfig
from .multiscale import MultiscaleConfig
from .pipeline import build_backends, count_image, evaluate_records

__all__ = [
    "BBox",
    "BinaryMask",
    "CandidateInstance",
    "Cluster",
    "FilterConfig",
    "GroundTruth",
    "MetricsReport",
    "MultiscaleConfig",
    "PipelineConfig",
    "ThresholdSchedule",
    "build_backends",
    "count_image",
    "evaluate_records",
    "finch_threshold_cluster",
    "from_profile",
    "iou",
    "original_finch_level0",
]
