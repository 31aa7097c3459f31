"""Approximate nearest neighbors: hashing, tombstones, segmented ranges."""

import numpy as np
import pytest

from ebtree.ann_index import (
    LshConfig,
    LshIndex,
    build_index,
    build_segmented,
    query_knn,
)
from ebtree.errors import DimensionError, NotIndexedError
from ebtree.margin_ranking import RankedPoint
from ebtree.testkit import brute_knn

from conftest import pt


def _cloud(n, dim, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    return [(f"p{i}", rng.normal(size=dim) * scale) for i in range(n)]


def _simplex_cloud(n, dim, seed):
    """Random probability vectors: the shape of data this index serves."""
    rng = np.random.default_rng(seed)
    return [(f"p{i}", rng.dirichlet(np.ones(dim))) for i in range(n)]


def _recall(points, queries, k, cfg):
    index = build_index(points, cfg)
    hits = total = 0
    for q in queries:
        exact = set(brute_knn(points, q, k))
        approx = {pid for pid, _ in query_knn(index, q, k)}
        hits += len(exact & approx)
        total += k
    return hits / total


def test_query_returns_ascending_exact_distances():
    points = _cloud(200, 6, seed=0)
    index = build_index(points, LshConfig())
    rng = np.random.default_rng(1)
    vectors = dict(points)
    for _ in range(20):
        q = rng.normal(size=6)
        result = query_knn(index, q, 10)
        dists = [d for _, d in result]
        assert dists == sorted(dists)
        for pid, d in result:
            assert d == pytest.approx(float(np.linalg.norm(vectors[pid] - q)), abs=1e-12)


def test_query_is_deterministic():
    points = _cloud(300, 5, seed=2)
    q = np.zeros(5)
    a = query_knn(build_index(points, LshConfig(seed=3)), q, 15)
    b = query_knn(build_index(points, LshConfig(seed=3)), q, 15)
    assert a == b


def test_recall_on_probability_vectors():
    points = _simplex_cloud(500, 8, seed=4)
    queries = [v for _, v in _simplex_cloud(50, 8, seed=5)]
    assert _recall(points, queries, 10, LshConfig()) >= 0.9


def test_recall_monotone_in_table_count():
    # table t's projections depend only on (seed, t), so more tables can
    # only widen every candidate set; checked at an awkward data scale
    # where single-table recall is genuinely poor
    points = _cloud(400, 8, seed=6, scale=1 / 3)
    queries = [v for _, v in _cloud(40, 8, seed=7, scale=1 / 3)]
    recalls = [_recall(points, queries, 10, LshConfig(num_tables=L, seed=0))
               for L in (1, 4, 8)]
    assert recalls == sorted(recalls)
    assert recalls[0] < recalls[-1]


def test_candidate_sets_grow_with_tables():
    points = _cloud(400, 8, seed=8)
    small = build_index(points, LshConfig(num_tables=2, seed=0))
    large = build_index(points, LshConfig(num_tables=8, seed=0))
    q = np.zeros(8)
    few = {pid for pid, _ in small.query_knn(q, 400)}
    many = {pid for pid, _ in large.query_knn(q, 400)}
    assert few <= many


def test_removed_ids_never_returned():
    points = _cloud(100, 4, seed=9)
    index = build_index(points, LshConfig())
    for pid, _ in points[:30]:
        index.remove(pid)
    assert len(index) == 70
    rng = np.random.default_rng(10)
    gone = {pid for pid, _ in points[:30]}
    for _ in range(25):
        result = query_knn(index, rng.normal(size=4), 100)
        assert gone.isdisjoint({pid for pid, _ in result})


def test_remove_unknown_or_twice_raises():
    index = build_index([("a", [0.0, 0.0])], LshConfig())
    with pytest.raises(NotIndexedError):
        index.remove("missing")
    index.remove("a")
    with pytest.raises(NotIndexedError):
        index.remove("a")
    assert query_knn(index, [0.0, 0.0], 5) == []


def test_dimension_checks():
    index = build_index([("a", [0.0, 0.0])], LshConfig())
    with pytest.raises(DimensionError):
        index.add("b", [1.0, 2.0, 3.0])
    with pytest.raises(DimensionError):
        index.query_knn([1.0, 2.0, 3.0], 1)
    with pytest.raises(ValueError):
        index.query_knn([0.0, 0.0], 0)


def test_empty_index_needs_dimension():
    with pytest.raises(ValueError):
        build_index([], LshConfig())
    index = build_index([], LshConfig(), dimension=3)
    assert query_knn(index, [0.0, 0.0, 0.0], 4) == []


def test_config_validation():
    with pytest.raises(ValueError):
        LshConfig(num_tables=0)
    with pytest.raises(ValueError):
        LshConfig(bucket_width=0.0)
    with pytest.raises(ValueError):
        LshConfig(segments=0)


# ---------------------------------------------------------------- segments

def _ranked(n, dim=4, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(RankedPoint(point=pt(f"r{i}", "a", rng.normal(size=dim)),
                               boundary_distance=float(i), rank=i))
    return out


def test_segment_bounds_partition_ranks():
    ranked = _ranked(103)
    seg = build_segmented(ranked, LshConfig(segments=16))
    assert seg.bounds[0] == 0 and seg.bounds[-1] == 103
    assert all(a <= b for a, b in zip(seg.bounds, seg.bounds[1:]))
    widths = [b - a for a, b in zip(seg.bounds, seg.bounds[1:])]
    assert max(widths) - min(widths) <= 1
    for rp in ranked:
        assert seg.rank_of[rp.point.id] == rp.rank


def test_segment_queries_stay_in_range():
    ranked = _ranked(80)
    seg = build_segmented(ranked, LshConfig(segments=8))
    for rank in (0, 39, 79):
        s = seg.segment_of(rank)
        idx = seg.index_for_rank(rank)
        lo, hi = seg.bounds[s], seg.bounds[s + 1]
        in_range = {rp.point.id for rp in ranked[lo:hi]}
        result = idx.query_knn(ranked[rank].point.embedding, 100)
        assert {pid for pid, _ in result} <= in_range


def test_segment_of_bounds_check():
    seg = build_segmented(_ranked(10), LshConfig(segments=2))
    with pytest.raises(ValueError):
        seg.segment_of(-1)
    with pytest.raises(ValueError):
        seg.segment_of(10)


def test_segmented_remove_routes_to_owner():
    ranked = _ranked(30)
    seg = build_segmented(ranked, LshConfig(segments=4))
    seg.remove("r7")
    idx = seg.index_for_rank(7)
    assert "r7" not in {pid for pid, _ in idx.query_knn(ranked[7].point.embedding, 30)}
    with pytest.raises(NotIndexedError):
        seg.remove("unknown")


def test_more_points_than_segments_not_required():
    # 3 points across 16 segments leaves most segments empty but functional
    seg = build_segmented(_ranked(3), LshConfig(segments=16))
    assert seg.bounds[-1] == 3
    assert seg.index_for_rank(2) is not None
