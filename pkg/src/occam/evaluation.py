"""Cluster-to-class matching and counting metrics.

Count metrics (MAE, RMSE, NAE, SRE) are computed over (image, class)
units. Precision/recall/F1 come from greedy matching of predicted
instances to ground-truth points, which catches false positives and
false negatives that cancel out in the raw counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .finch import Cluster
from .maskproc import CandidateInstance


@dataclass
class GroundTruth:
    """Per-class instance center points; boxes retained when a dataset has them."""

    points_by_class: dict[str, list[tuple[float, float]]]
    boxes_by_class: dict[str, list[tuple[float, float, float, float]]] = field(default_factory=dict)

    @property
    def classes(self) -> list[str]:
        return list(self.points_by_class)

    @property
    def total_points(self) -> int:
        return sum(len(v) for v in self.points_by_class.values())


@dataclass
class CountPrediction:
    clusters: list[Cluster]
    candidates: dict[int, CandidateInstance]

    @property
    def total(self) -> int:
        return sum(c.size for c in self.clusters)


def cover_points(cand: CandidateInstance, gt: GroundTruth) -> dict[str, int]:
    """Per-class number of GT points whose pixel lies inside the mask."""
    h, w = cand.mask.shape
    counts = {}
    for label, points in gt.points_by_class.items():
        inside = 0
        for x, y in points:
            px, py = int(x), int(y)
            if 0 <= px < w and 0 <= py < h and cand.mask.pixels[py, px]:
                inside += 1
        counts[label] = inside
    return counts


def _dominant_class(cover: dict[str, int], class_order: list[str]) -> str | None:
    best = None
    best_count = 0
    for label in class_order:
        c = cover.get(label, 0)
        if c > best_count:
            best = label
            best_count = c
    return best


def match_clusters(pred: CountPrediction, gt: GroundTruth) -> dict[str, int | None]:
    """Greedy one-to-one assignment of classes to clusters.

    Affinity of a cluster for a class is the number of members whose
    dominant covered class is that class. Assignment proceeds by
    descending affinity (ties: larger cluster, then earlier class, then
    earlier cluster). Classes no cluster covers stay unmatched.
    """
    class_order = gt.classes
    affinities = []
    for ci, cluster in enumerate(pred.clusters):
        tally = {label: 0 for label in class_order}
        for member in cluster.members:
            cover = cover_points(pred.candidates[member], gt)
            dom = _dominant_class(cover, class_order)
            if dom is not None:
                tally[dom] += 1
        for li, label in enumerate(class_order):
            if tally[label] > 0:
                affinities.append((tally[label], cluster.size, li, ci))

    affinities.sort(key=lambda t: (-t[0], -t[1], t[2], t[3]))
    assignment: dict[str, int | None] = {label: None for label in class_order}
    used_clusters: set[int] = set()
    for _, _, li, ci in affinities:
        label = class_order[li]
        if assignment[label] is not None or ci in used_clusters:
            continue
        assignment[label] = ci
        used_clusters.add(ci)
    return assignment


def compute_count_metrics(pairs: list[tuple[float, float]]) -> tuple[float, float, float, float]:
    """(MAE, RMSE, NAE, SRE) over (pred, gt) unit pairs.

    NAE and SRE average |e|/gt and e^2/gt over units with gt > 0; both are
    0.0 when no such unit exists.
    """
    if not pairs:
        raise ValueError("cannot compute metrics over an empty pair list")
    errors = [pred - gt for pred, gt in pairs]
    mae = sum(abs(e) for e in errors) / len(errors)
    rmse = math.sqrt(sum(e * e for e in errors) / len(errors))
    rel = [(abs(e) / gt, e * e / gt) for e, (_, gt) in zip(errors, pairs) if gt > 0]
    nae = sum(r[0] for r in rel) / len(rel) if rel else 0.0
    sre = sum(r[1] for r in rel) / len(rel) if rel else 0.0
    return mae, rmse, nae, sre


def instance_match(pred: CountPrediction, gt: GroundTruth) -> tuple[int, int, int]:
    """Greedy instance matching; returns (TP, FP, FN).

    Instances are visited by descending mask area. An instance claims one
    still-unclaimed covered point (preferring its cluster's assigned
    class) and counts as a true positive; instances covering nothing
    unclaimed are false positives, leftover points false negatives.
    """
    assignment = match_clusters(pred, gt)
    cluster_class: dict[int, str] = {
        ci: label for label, ci in assignment.items() if ci is not None
    }
    class_order = gt.classes
    claimed: dict[str, set[int]] = {label: set() for label in class_order}

    instances = []
    for ci, cluster in enumerate(pred.clusters):
        for member in cluster.members:
            instances.append((pred.candidates[member], ci))
    instances.sort(key=lambda t: (-t[0].mask.area, t[0].id))

    tp = 0
    for cand, ci in instances:
        h, w = cand.mask.shape
        available: list[tuple[int, int, str]] = []  # (class rank, point index, label)
        preferred = cluster_class.get(ci)
        for li, label in enumerate(class_order):
            for pi, (x, y) in enumerate(gt.points_by_class[label]):
                if pi in claimed[label]:
                    continue
                px, py = int(x), int(y)
                if 0 <= px < w and 0 <= py < h and cand.mask.pixels[py, px]:
                    rank = -1 if label == preferred else li
                    available.append((rank, pi, label))
        if available:
            available.sort(key=lambda t: (t[0], t[1]))
            _, pi, label = available[0]
            claimed[label].add(pi)
            tp += 1
    total_pred = len(instances)
    total_gt = gt.total_points
    return tp, total_pred - tp, total_gt - tp


def prf_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def compute_prf(pred: CountPrediction, gt: GroundTruth) -> tuple[float, float, float]:
    return prf_from_counts(*instance_match(pred, gt))


@dataclass
class MetricsReport:
    mae: float
    rmse: float
    nae: float
    sre: float
    precision: float
    recall: float
    f1: float
    n_units: int

    def to_json(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "nae": self.nae,
            "sre": self.sre,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "n_units": self.n_units,
        }


def aggregate_metrics(
    unit_pairs: list[tuple[float, float]], match_counts: list[tuple[int, int, int]]
) -> MetricsReport:
    """Combine per-unit count pairs and per-image (TP, FP, FN) triples."""
    mae, rmse, nae, sre = compute_count_metrics(unit_pairs)
    tp = sum(t for t, _, _ in match_counts)
    fp = sum(f for _, f, _ in match_counts)
    fn = sum(f for _, _, f in match_counts)
    precision, recall, f1 = prf_from_counts(tp, fp, fn)
    return MetricsReport(
        mae=mae,
        rmse=rmse,
        nae=nae,
        sre=sre,
        precision=precision,
        recall=recall,
        f1=f1,
        n_units=len(unit_pairs),
    )
