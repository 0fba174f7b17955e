"""Threshold-gated variant of first-neighbor agglomerative clustering.

Every vector starts as its own cluster. Each round recomputes cluster
centroids, links clusters that are at least one-directional nearest
neighbors of each other AND whose centroid distance is strictly below the
round's threshold, then merges each connected group of links into one
cluster. The loop ends when no links form. The threshold comes from a
decreasing-then-constant schedule, which prevents far-apart points from
being forced together by symmetrized neighbor relations, so singleton
clusters can survive.

``original_finch_level0`` keeps the classic parameter-free rule (first
neighbor links plus shared-neighbor links, no distance gate) for
comparison; there, every point acquires at least one link, so clusters
have at least two members whenever two points exist.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .embedding import FeatureVector


@dataclass(frozen=True)
class ThresholdSchedule:
    """Per-round merge gates; rounds past the end reuse the last value."""

    initial: tuple[float, ...]

    def __post_init__(self):
        if not self.initial:
            raise ValueError("schedule needs at least one threshold")
        if any(t <= 0 for t in self.initial):
            raise ValueError(f"thresholds must be positive: {self.initial}")
        if any(a < b for a, b in zip(self.initial, self.initial[1:])):
            raise ValueError(f"thresholds must be non-increasing: {self.initial}")

    @property
    def tail(self) -> float:
        return self.initial[-1]

    def threshold_for(self, iteration: int) -> float:
        """Threshold for a 1-based iteration index."""
        if iteration < 1:
            raise ValueError("iterations are 1-based")
        return self.initial[min(iteration, len(self.initial)) - 1]

    @classmethod
    def parse(cls, text: str) -> "ThresholdSchedule":
        try:
            values = tuple(float(part) for part in text.split(",") if part.strip())
        except ValueError as exc:
            raise ValueError(f"cannot parse schedule {text!r}") from exc
        return cls(values)


@dataclass(frozen=True)
class Cluster:
    members: tuple[int, ...]
    centroid: np.ndarray

    @property
    def size(self) -> int:
        return len(self.members)


def _as_matrix(features) -> tuple[np.ndarray, list[int]]:
    if isinstance(features, np.ndarray):
        mat = np.asarray(features, dtype=np.float64)
        if mat.ndim != 2:
            raise ValueError(f"expected (n, d) matrix, got shape {mat.shape}")
        return mat, list(range(mat.shape[0]))
    seq = list(features)
    if not seq:
        return np.zeros((0, 0)), []
    ids = [fv.candidate_id for fv in seq]
    dims = {fv.values.shape for fv in seq}
    if len(dims) > 1:
        raise ValueError(f"feature dimensions differ: {sorted(dims)}")
    return np.stack([np.asarray(fv.values, dtype=np.float64) for fv in seq]), ids


def _distance_matrix(centroids: np.ndarray) -> np.ndarray:
    # |a-b|^2 = |a|^2 + |b|^2 - 2ab keeps memory at O(n^2) for high dims
    sq = np.einsum("ij,ij->i", centroids, centroids)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (centroids @ centroids.T)
    np.maximum(d2, 0.0, out=d2)
    dist = np.sqrt(d2)
    np.fill_diagonal(dist, np.inf)
    return dist


def partial_neighbor_edges(centroids: np.ndarray, theta: float) -> set[tuple[int, int]]:
    """Links (i, j), i < j, where one is the other's nearest and they are
    closer than theta. Nearest-neighbor ties go to the lower index."""
    mat = np.asarray(centroids, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise ValueError(f"expected (n, d) centroids with n >= 1, got shape {mat.shape}")
    if theta <= 0:
        raise ValueError("theta must be positive")
    n = mat.shape[0]
    if n == 1:
        return set()
    dist = _distance_matrix(mat)
    nn = np.argmin(dist, axis=1)  # argmin takes the first (lowest) index on ties
    edges = set()
    for i in range(n):
        j = int(nn[i])
        if dist[i, j] < theta:
            edges.add((min(i, j), max(i, j)))
    return edges


def _merge_groups(count: int, edges: set[tuple[int, int]]) -> list[list[int]]:
    """Connected components of the link graph, ordered by smallest member."""
    parent = list(range(count))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(count):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def finch_threshold_cluster(
    features: np.ndarray | Sequence[FeatureVector],
    schedule: ThresholdSchedule,
) -> list[Cluster]:
    """Cluster feature vectors with the threshold-gated merge loop.

    Returns clusters sorted by size descending, ties by smallest member id.
    Singletons are legal output: a point farther than the gate from every
    neighbor never merges.
    """
    X, ids = _as_matrix(features)
    n = X.shape[0]
    if n == 0:
        return []
    member_sets: list[list[int]] = [[i] for i in range(n)]
    iteration = 0
    while len(member_sets) > 1:
        iteration += 1
        theta = schedule.threshold_for(iteration)
        centroids = np.stack([X[m].mean(axis=0) for m in member_sets])
        edges = partial_neighbor_edges(centroids, theta)
        if not edges:
            break
        groups = _merge_groups(len(member_sets), edges)
        member_sets = [sorted(x for g in group for x in member_sets[g]) for group in groups]

    clusters = [
        Cluster(members=tuple(ids[i] for i in m), centroid=X[m].mean(axis=0))
        for m in member_sets
    ]
    clusters.sort(key=lambda c: (-c.size, min(c.members)))
    return clusters


def original_finch_level0(features: np.ndarray | Sequence[FeatureVector]) -> list[Cluster]:
    """First partition of the classic algorithm: symmetrized first-neighbor
    links plus shared-first-neighbor links, merged once, no distance gate."""
    X, ids = _as_matrix(features)
    n = X.shape[0]
    if n == 0:
        return []
    if n == 1:
        return [Cluster(members=(ids[0],), centroid=X[0].copy())]
    dist = _distance_matrix(X)
    nn = np.argmin(dist, axis=1)
    edges = {(min(i, int(nn[i])), max(i, int(nn[i]))) for i in range(n)}
    # shared-neighbor cliques: chaining members is enough for connectivity
    by_nn: dict[int, list[int]] = {}
    for i in range(n):
        by_nn.setdefault(int(nn[i]), []).append(i)
    for group in by_nn.values():
        for a, b in zip(group, group[1:]):
            edges.add((a, b))
    groups = _merge_groups(n, edges)
    clusters = [
        Cluster(members=tuple(ids[i] for i in sorted(g)), centroid=X[sorted(g)].mean(axis=0))
        for g in groups
    ]
    clusters.sort(key=lambda c: (-c.size, min(c.members)))
    return clusters
