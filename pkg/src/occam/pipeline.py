"""End-to-end orchestration: image -> candidates -> features -> clusters.

Providers and embedders are constructed from spec strings (``mock``,
``file:<dir>``, ``baseline``, ``wire:<command or URL>``), so neural
backends stay behind the wire protocol.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import PipelineConfig
from .embedding import CropCache, Embedder, FeatureVector, BaselineEmbedder, embed_candidates
from .errors import ConfigError
from .evaluation import (
    CountPrediction,
    GroundTruth,
    aggregate_metrics,
    instance_match,
    match_clusters,
    MetricsReport,
)
from .finch import Cluster, finch_threshold_cluster
from .maskproc import CandidateInstance
from .multiscale import refine_multiscale
from .prompting import FileProvider, MockProvider, RecordingProvider, SegmentationProvider

log = logging.getLogger(__name__)


@dataclass
class Backends:
    """Provider and embedder resolved from spec strings; owns wire clients."""

    provider: SegmentationProvider
    embedder: Embedder
    _clients: list = field(default_factory=list)

    def close(self) -> None:
        for client in self._clients:
            client.close()
        self._clients.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def build_backends(cfg: PipelineConfig, record_dir=None) -> Backends:
    from .wire import WireClient, WireEmbedder, WireSegmentationProvider

    clients: dict[str, "WireClient"] = {}

    def client_for(target: str) -> "WireClient":
        if target not in clients:
            clients[target] = WireClient(target)
        return clients[target]

    spec = cfg.provider_spec
    if spec == "mock" or spec.startswith("mock:"):
        # "mock:<min_rel_area>" hides blobs below that fraction of the image
        try:
            min_rel_area = float(spec[len("mock:") :]) if ":" in spec else 0.0
        except ValueError:
            raise ConfigError(f"bad mock provider spec {spec!r}; expected mock or mock:<fraction>")
        provider: SegmentationProvider = MockProvider(min_rel_area=min_rel_area)
    elif spec.startswith("file:"):
        provider = FileProvider(spec[len("file:") :])
    elif spec.startswith("wire:"):
        provider = WireSegmentationProvider(client_for(spec[len("wire:") :]))
    else:
        raise ConfigError(f"unknown provider spec {spec!r}")

    espec = cfg.embedder_spec
    if espec == "baseline":
        embedder: Embedder = BaselineEmbedder()
    elif espec.startswith("wire:"):
        embedder = WireEmbedder(client_for(espec[len("wire:") :]))
    else:
        raise ConfigError(f"unknown embedder spec {espec!r}")

    if record_dir is not None:
        provider = RecordingProvider(provider, record_dir)
    return Backends(provider=provider, embedder=embedder, _clients=list(clients.values()))


@dataclass
class CountResult:
    image_id: str | None
    candidates: list[CandidateInstance]
    features: list[FeatureVector]
    clusters: list[Cluster]

    @property
    def total(self) -> int:
        return sum(c.size for c in self.clusters)

    def prediction(self) -> CountPrediction:
        return CountPrediction(
            clusters=self.clusters, candidates={c.id: c for c in self.candidates}
        )

    def to_report(self) -> dict:
        return {
            "image": self.image_id,
            "total": self.total,
            "clusters": [
                {"id": i, "size": c.size, "members": list(c.members)}
                for i, c in enumerate(self.clusters)
            ],
            "instances": [
                {"id": c.id, "bbox": c.bbox.to_list() if c.bbox else None}
                for c in self.candidates
            ],
        }


def count_image(
    img: np.ndarray,
    provider: SegmentationProvider,
    embedder: Embedder,
    cfg: PipelineConfig,
    image_id: str | None = None,
    cache: CropCache | None = None,
) -> CountResult:
    """Run the full counting pipeline on one image."""
    candidates = refine_multiscale(
        img,
        provider,
        cfg.grid_spacing,
        cfg.filter,
        cfg.effective_multiscale(),
        mask_processing=cfg.mask_processing,
        image_id=image_id,
    )
    if not candidates:
        return CountResult(image_id=image_id, candidates=[], features=[], clusters=[])
    features = embed_candidates(img, candidates, embedder, cfg.crop_target, cache=cache)
    if cfg.clustering:
        clusters = finch_threshold_cluster(features, cfg.schedule)
    else:
        # ablation: every candidate counts toward a single pseudo-class
        vectors = np.stack([fv.values for fv in features])
        clusters = [
            Cluster(members=tuple(fv.candidate_id for fv in features), centroid=vectors.mean(axis=0))
        ]
    return CountResult(image_id=image_id, candidates=candidates, features=features, clusters=clusters)


@dataclass
class EvalUnit:
    image_id: str
    class_label: str
    gt_count: int
    pred_count: int


@dataclass
class EvalOutcome:
    report: MetricsReport
    units: list[EvalUnit]
    per_image: list[dict]


def evaluate_records(
    records,
    provider: SegmentationProvider,
    embedder: Embedder,
    cfg: PipelineConfig,
    max_gt: int | None = None,
) -> EvalOutcome:
    """Count every record's image and score predictions against its GT."""
    kept = []
    for record in records:
        if max_gt is not None and record.ground_truth.total_points > max_gt:
            continue
        kept.append(record)
    if not kept:
        from .errors import DataError

        raise DataError("no images left to evaluate (check --max-gt and the dataset)")

    serialized = getattr(provider, "serialized", False)
    workers = 1 if serialized else max(1, cfg.workers)

    lock = threading.Lock()
    results: dict[str, CountResult] = {}

    def run_one(record) -> None:
        img = record.load_image()
        result = count_image(
            img, provider, embedder, cfg, image_id=str(record.image_path)
        )
        with lock:
            results[str(record.image_path)] = result

    if workers == 1:
        for record in kept:
            run_one(record)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_one, kept))

    unit_pairs: list[tuple[float, float]] = []
    units: list[EvalUnit] = []
    match_counts: list[tuple[int, int, int]] = []
    per_image: list[dict] = []
    for record in kept:
        result = results[str(record.image_path)]
        gt = record.ground_truth
        pred = result.prediction()
        assignment = match_clusters(pred, gt)
        image_units = []
        for label in gt.classes:
            ci = assignment[label]
            pred_count = pred.clusters[ci].size if ci is not None else 0
            gt_count = len(gt.points_by_class[label])
            unit_pairs.append((pred_count, gt_count))
            unit = EvalUnit(
                image_id=str(record.image_path),
                class_label=label,
                gt_count=gt_count,
                pred_count=pred_count,
            )
            units.append(unit)
            image_units.append(unit)
        tp, fp, fn = instance_match(pred, gt)
        match_counts.append((tp, fp, fn))
        per_image.append(
            {
                "image": str(record.image_path),
                "total_pred": result.total,
                "total_gt": gt.total_points,
                "tp": tp,
                "fp": fp,
                "fn": fn,
                "classes": {
                    u.class_label: {"gt": u.gt_count, "pred": u.pred_count} for u in image_units
                },
            }
        )

    report = aggregate_metrics(unit_pairs, match_counts)
    return EvalOutcome(report=report, units=units, per_image=per_image)
