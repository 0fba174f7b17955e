import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from occam.embedding import FeatureVector
from occam.finch import (
    Cluster,
    ThresholdSchedule,
    finch_threshold_cluster,
    original_finch_level0,
    partial_neighbor_edges,
)

from oracles import finch_threshold_oracle


def partition(clusters):
    return {frozenset(c.members) for c in clusters}


def test_schedule_validation():
    with pytest.raises(ValueError):
        ThresholdSchedule(())
    with pytest.raises(ValueError):
        ThresholdSchedule((3.0, 4.0))
    with pytest.raises(ValueError):
        ThresholdSchedule((1.0, -2.0))
    sched = ThresholdSchedule((12.0, 9.0, 7.75))
    assert sched.threshold_for(1) == 12.0
    assert sched.threshold_for(3) == 7.75
    assert sched.threshold_for(9) == 7.75
    assert sched.tail == 7.75


def test_schedule_parse():
    assert ThresholdSchedule.parse("5.0,4.0,3.0").initial == (5.0, 4.0, 3.0)
    with pytest.raises(ValueError):
        ThresholdSchedule.parse("a,b")


def test_edges_single_centroid():
    assert partial_neighbor_edges(np.array([[0.0, 0.0]]), 1.0) == set()


def test_edges_one_dimensional_example():
    # {0, 1, 10} with theta 2: only (0,1); 10's nearest is 1 at distance 9
    pts = np.array([[0.0], [1.0], [10.0]])
    assert partial_neighbor_edges(pts, 2.0) == {(0, 1)}


def test_edges_strict_inequality_at_theta():
    pts = np.array([[0.0], [2.0]])
    assert partial_neighbor_edges(pts, 2.0) == set()
    assert partial_neighbor_edges(pts, 2.0001) == {(0, 1)}


def test_cluster_empty_input():
    assert finch_threshold_cluster(np.zeros((0, 3)), ThresholdSchedule((1.0,))) == []
    assert original_finch_level0(np.zeros((0, 3))) == []


def test_cluster_single_vector():
    out = finch_threshold_cluster(np.array([[1.0, 2.0]]), ThresholdSchedule((1.0,)))
    assert len(out) == 1
    assert out[0].members == (0,)
    assert out[0].size == 1


def test_cluster_one_dimensional_trace():
    # {0, 1, 10}, schedule [2]: round 1 merges {0,1}; round 2 centroid
    # distance 9.5 >= 2 stops the loop
    pts = np.array([[0.0], [1.0], [10.0]])
    out = finch_threshold_cluster(pts, ThresholdSchedule((2.0,)))
    assert partition(out) == {frozenset({0, 1}), frozenset({2})}
    assert out[0].centroid == pytest.approx(np.array([0.5]))


def test_cluster_matches_oracle_on_trace():
    pts = np.array([[0.0], [1.0], [10.0]])
    got = partition(finch_threshold_cluster(pts, ThresholdSchedule((2.0,))))
    want = {frozenset(c) for c in finch_threshold_oracle(pts.tolist(), [2.0])}
    assert got == want


def test_feature_vector_input_uses_candidate_ids():
    feats = [
        FeatureVector(values=np.array([0.0]), candidate_id=7),
        FeatureVector(values=np.array([0.5]), candidate_id=9),
        FeatureVector(values=np.array([50.0]), candidate_id=4),
    ]
    out = finch_threshold_cluster(feats, ThresholdSchedule((2.0,)))
    assert partition(out) == {frozenset({7, 9}), frozenset({4})}


def test_dimension_mismatch_rejected():
    feats = [
        FeatureVector(values=np.array([0.0]), candidate_id=0),
        FeatureVector(values=np.array([0.0, 1.0]), candidate_id=1),
    ]
    with pytest.raises(ValueError):
        finch_threshold_cluster(feats, ThresholdSchedule((2.0,)))


def test_output_ordering():
    pts = np.array([[0.0], [0.1], [0.2], [100.0], [100.1], [200.0]])
    out = finch_threshold_cluster(pts, ThresholdSchedule((1.0,)))
    sizes = [c.size for c in out]
    assert sizes == sorted(sizes, reverse=True)
    assert out[0].members == (0, 1, 2)
    assert out[1].members == (3, 4)
    assert out[2].members == (5,)


def test_original_finch_no_singletons():
    # {0,1,10}: nearest of 10 is 1, so one chain connects everything
    pts = np.array([[0.0], [1.0], [10.0]])
    out = original_finch_level0(pts)
    assert partition(out) == {frozenset({0, 1, 2})}


def test_original_finch_two_points():
    out = original_finch_level0(np.array([[0.0], [9e9]]))
    assert partition(out) == {frozenset({0, 1})}


def test_original_finch_shared_neighbor_link():
    # 0 and 2 share nearest neighbor 1 without being mutual neighbors
    pts = np.array([[0.0], [1.0], [2.1]])
    out = original_finch_level0(pts)
    assert partition(out) == {frozenset({0, 1, 2})}


def test_singleton_survives_threshold_variant():
    pts = np.array([[0.0], [0.5], [0.9], [1000.0]])
    sched = ThresholdSchedule((12.0, 9.0, 7.75))
    variant = finch_threshold_cluster(pts, sched)
    assert frozenset({3}) in partition(variant)
    baseline = original_finch_level0(pts)
    assert all(c.size >= 2 for c in baseline)


def test_centroids_are_recomputed_means():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(12, 3))
    out = finch_threshold_cluster(pts, ThresholdSchedule((0.8,)))
    for cluster in out:
        np.testing.assert_allclose(cluster.centroid, pts[list(cluster.members)].mean(axis=0))


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_partition_covers_ids_exactly(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 16))
    d = int(rng.integers(1, 5))
    pts = rng.normal(size=(n, d)) * rng.uniform(0.5, 20)
    sched = ThresholdSchedule(tuple(sorted(rng.uniform(0.2, 10, size=3), reverse=True)))
    out = finch_threshold_cluster(pts, sched)
    seen = sorted(m for c in out for m in c.members)
    assert seen == list(range(n))


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_matches_oracle_random(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 14))
    d = int(rng.integers(1, 4))
    pts = rng.normal(size=(n, d)) * 3
    theta = float(rng.uniform(0.3, 6.0))
    got = partition(finch_threshold_cluster(pts, ThresholdSchedule((theta,))))
    want = {frozenset(c) for c in finch_threshold_oracle(pts.tolist(), [theta])}
    assert got == want


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_first_round_coarsens_with_theta(seed):
    # with a wider gate, round-1 links are a superset, so its partition
    # can only merge groups of the tighter partition, never split them
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 20))
    pts = rng.normal(size=(n, 2)) * 4
    lo = float(rng.uniform(0.2, 3.0))
    hi = lo + float(rng.uniform(0.1, 4.0))
    edges_lo = partial_neighbor_edges(pts, lo)
    edges_hi = partial_neighbor_edges(pts, hi)
    assert edges_lo <= edges_hi

    from occam.finch import _merge_groups

    groups_lo = _merge_groups(n, edges_lo)
    groups_hi = _merge_groups(n, edges_hi)
    lookup_hi = {}
    for gi, group in enumerate(groups_hi):
        for member in group:
            lookup_hi[member] = gi
    for group in groups_lo:
        assert len({lookup_hi[m] for m in group}) == 1
