import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import reference_weights
from querywatch.errors import DimensionMismatch, EmptyInput, EmptyMemory, SchemeMismatch
from querywatch.fingerprint import Fingerprint
from querywatch.similarity import cosine, memory_similarity, weight_vector, window_lengths


def fp(counts, version=1):
    counts = np.asarray(counts, dtype=np.int64)
    return Fingerprint(counts, int(counts.sum()), scheme_version=version)


counts_st = st.lists(st.integers(0, 20), min_size=8, max_size=8)
components_st = st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=1, max_size=90)


def test_cosine_examples():
    assert cosine(fp([1, 1, 0]), fp([1, 0, 0])) == pytest.approx(1 / math.sqrt(2))
    assert cosine(fp([1, 0, 0]), fp([0, 3, 0])) == 0.0
    assert cosine(fp([2, 5, 1]), fp([2, 5, 1])) == 1.0
    assert cosine(fp([0, 0, 0]), fp([1, 2, 3])) == 0.0


def test_cosine_compatibility_errors():
    with pytest.raises(DimensionMismatch):
        cosine(fp([1, 2]), fp([1, 2, 3]))
    with pytest.raises(SchemeMismatch):
        cosine(fp([1, 2]), fp([1, 2], version=2))


@given(counts_st, counts_st)
def test_cosine_symmetric_and_bounded(a, b):
    x, y = fp(a), fp(b)
    assert cosine(x, y) == cosine(y, x)
    assert 0.0 <= cosine(x, y) <= 1.0


@given(counts_st)
def test_self_similarity(a):
    x = fp(a)
    if x.sq_norm:
        assert abs(cosine(x, x) - 1.0) <= 1e-9


def test_window_schedule_for_default_k():
    assert list(window_lengths(14, 75)) == [2, 3, 4, 5, 6, 7, 3, 4, 5, 6, 7, 3, 4, 5]


def test_uniform_and_single_weights():
    np.testing.assert_allclose(weight_vector([0.4] * 75, 75), 1 / 75)
    assert weight_vector([0.3], 1).tolist() == [1.0]
    with pytest.raises(EmptyInput):
        weight_vector([], 5)


def test_outlier_neighbourhood_downweighted():
    comps = [0.9, 0.9, 0.1, 0.9, 0.9]
    w = weight_vector(comps, 5)
    np.testing.assert_allclose(w, reference_weights(comps, 5), atol=1e-9)
    # at k=5 every window has length 2 ([i-1, i]); positions 2 and 3 see the outlier
    assert w[2] < 1 / 5 and w[3] < 1 / 5
    assert w[0] > 1 / 5 and w[1] > 1 / 5 and w[4] > 1 / 5


def test_all_zero_components_fall_back_to_uniform():
    np.testing.assert_allclose(weight_vector([0.0] * 10, 75), 0.1)


@settings(max_examples=200)
@given(components_st, st.integers(1, 200))
def test_weights_match_reference(comps, k):
    w = weight_vector(comps, k)
    np.testing.assert_allclose(w, reference_weights(comps, k), atol=1e-9)
    assert abs(w.sum() - 1.0) <= 1e-9 and np.all(w >= 0)


def test_memory_similarity_examples():
    x = fp([3, 1, 0, 2])
    assert memory_similarity(x, [x, x, x]).score == 1.0
    assert memory_similarity(x, [fp([0, 0, 5, 0])] * 4).score == 0.0
    with pytest.raises(EmptyMemory):
        memory_similarity(x, [])


@settings(max_examples=100)
@given(counts_st, st.lists(counts_st, min_size=1, max_size=12))
def test_score_is_direct_weighted_sum(q, mem):
    x, memory = fp(q), [fp(m) for m in mem]
    br = memory_similarity(x, memory, k=75)
    direct = sum(cosine(x, y) * a for y, a in zip(memory, br.weights))
    assert abs(br.score - direct) <= 1e-9
    assert br.components.min() - 1e-12 <= br.score <= br.components.max() + 1e-12
