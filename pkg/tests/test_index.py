import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_threshold, naive_topk
from vccscan.embed import EmbeddingVector, l2_normalize
from vccscan.errors import DimensionMismatch, DuplicateId, EmptyInput
from vccscan.index import build, query_threshold, query_topk


def random_vectors(n, dim, seed):
    rng = np.random.default_rng(seed)
    return [EmbeddingVector(l2_normalize(rng.standard_normal(dim)), f"v{i}") for i in range(n)]


def test_build_examples():
    assert len(build(random_vectors(3, 8, 0))) == 3
    mixed = random_vectors(1, 512, 1) + [EmbeddingVector(l2_normalize(np.ones(256)), "other")]
    with pytest.raises(DimensionMismatch):
        build(mixed)
    vecs = random_vectors(2, 8, 2)
    with pytest.raises(DuplicateId):
        build([vecs[0], EmbeddingVector(vecs[1].values, vecs[0].source_id)])
    with pytest.raises(EmptyInput):
        build([])
    with pytest.raises(ValueError):
        build([EmbeddingVector(np.ones(8), "not-unit")])


def test_self_match_and_out_of_range_threshold():
    vecs = random_vectors(20, 16, 3)
    index = build(vecs)
    hits = query_threshold(index, vecs[7], 0.99)
    assert hits[0][0] == "v7" and hits[0][1] == pytest.approx(1.0)
    assert query_threshold(index, vecs[7], 1.0 + 1e-9) == []
    assert query_topk(index, vecs[7], 1)[0][0] == "v7"


def test_topk_larger_than_index():
    vecs = random_vectors(5, 8, 4)
    index = build(vecs)
    result = query_topk(index, vecs[0], 50)
    assert [r[0] for r in result] == [r[0] for r in naive_topk(index.ids, [v.values.tolist() for v in vecs],
                                                             vecs[0].values.tolist(), 5)]


def test_query_dimension_checked():
    index = build(random_vectors(3, 8, 5))
    with pytest.raises(DimensionMismatch):
        index.query_threshold(np.ones(4) / 2, 0.1)


def test_ties_follow_insertion_order():
    e = l2_normalize([1.0, 1.0])
    vecs = [EmbeddingVector(e, "b"), EmbeddingVector(e, "a"), EmbeddingVector(l2_normalize([1.0, 0.0]), "c")]
    hits = build(vecs).query_threshold(e, 0.0)
    assert [h[0] for h in hits] == ["b", "a", "c"]


def test_random_instance_equals_naive_scan():
    vecs = random_vectors(300, 64, 6)
    rows = [v.values.tolist() for v in vecs]
    index = build(vecs)
    rng = np.random.default_rng(7)
    for _ in range(5):
        q = l2_normalize(rng.standard_normal(64))
        assert index.query_threshold(q, 0.1) == naive_threshold(index.ids, rows, q.tolist(), 0.1)
        assert index.query_topk(q, 10) == naive_topk(index.ids, rows, q.tolist(), 10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-1, 1), st.floats(0, 1), st.integers(1, 30))
def test_monotone_thresholds_and_topk_prefix(seed, t1, delta, k):
    vecs = random_vectors(30, 12, seed)
    index = build(vecs)
    q = vecs[seed % 30]
    low = {h[0] for h in index.query_threshold(q, t1)}
    high = {h[0] for h in index.query_threshold(q, t1 + delta)}
    assert high <= low
    assert index.query_topk(q, k) == index.query_topk(q, k + 1)[:k]
    assert all(-1.0 <= s <= 1.0 + 1e-9 for _, s in index.query_topk(q, 30))


def test_index_is_read_only():
    index = build(random_vectors(3, 8, 8))
    with pytest.raises(ValueError):
        index.vector("v0")[0] = 1.0
