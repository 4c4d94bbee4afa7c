import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_array_equal

from ihif.errors import DataError
from ihif.features import (
    ExtractionParams,
    GlobalLengths,
    build_vector,
    fit_global_lengths,
    localize,
    per_image_L,
    vector_layout,
)

WORKED = np.arange(1, 17, dtype=np.float64).reshape(4, 4)


def oracle_blocks(resp, w, threshold):
    """Plain-loop reference for one response."""
    resp = np.asarray(resp, dtype=float)
    m = sum(resp.ravel().tolist()) / resp.size
    out = []
    for br in range(resp.shape[0] // w):
        for bc in range(resp.shape[1] // w):
            vals = [resp[br * w + i, bc * w + j] for i in range(w) for j in range(w)]
            above = [v for v in vals if v > m]
            if not above:
                out.append([m])
                continue
            chi = sum(above) / len(above)
            near = [v for v in above if abs(v - chi) < threshold]
            out.append(sorted(near, reverse=True) if near else [chi])
    return m, out


def test_worked_example():
    rf = localize(WORKED, ExtractionParams(block_size=2, threshold=3))
    assert rf.means[0] == 8.5
    assert rf.blocks(0) == [[8.5], [8.5], [14.0, 13.0, 10.0, 9.0], [16.0, 15.0, 12.0, 11.0]]
    gl = per_image_L(rf)
    assert gl.lengths.tolist() == [1]
    assert build_vector(rf, gl).tolist() == [8.5, 8.5, 14.0, 16.0]


def test_constant_response_all_fallback():
    rf = localize(np.full((2, 6, 6), 2.5), ExtractionParams(block_size=3))
    for r in range(2):
        assert rf.blocks(r) == [[2.5]] * 4
    gl = per_image_L(rf)
    assert gl.lengths.tolist() == [1, 1]
    assert build_vector(rf, gl).tolist() == [2.5] * 8


def test_second_fallback_uses_subset_mean():
    # two values above the mean, 10 apart: neither is within 3 of their mean 15
    resp = np.array([[10.0, 20.0], [0.0, 0.0]])
    rf = localize(resp, ExtractionParams(block_size=2, threshold=3))
    assert rf.blocks(0) == [[15.0]]


def test_partial_blocks_dropped():
    rf = localize(np.random.default_rng(0).random((7, 9)), ExtractionParams(block_size=4))
    assert rf.grid == (1, 2) and rf.n_blocks == 2


def test_too_small_for_a_block():
    with pytest.raises(DataError):
        localize(np.ones((3, 8)), ExtractionParams(block_size=4))


def test_params_validation():
    with pytest.raises(ValueError):
        ExtractionParams(block_size=0)
    with pytest.raises(ValueError):
        ExtractionParams(threshold=0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 3), st.floats(0.05, 4.0),
       st.integers(0, 2**31), st.booleans())
def test_matches_loop_oracle(w, nbr, nbc, threshold, seed, ties):
    rng = np.random.default_rng(seed)
    shape = (2, nbr * w + rng.integers(0, w), nbc * w + rng.integers(0, w))
    stack = rng.integers(0, 4, shape).astype(float) if ties else rng.random(shape) * 5
    rf = localize(stack, ExtractionParams(block_size=w, threshold=threshold))
    for r in range(2):
        m, blocks = oracle_blocks(stack[r], w, threshold)
        assert rf.means[r] == pytest.approx(m, rel=1e-12)
        got = rf.blocks(r)
        assert len(got) == len(blocks)
        for a, b in zip(got, blocks):
            assert a == pytest.approx(b, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_retained_values_satisfy_filters(seed):
    rng = np.random.default_rng(seed)
    resp = rng.random((12, 12)) * 10
    rf = localize(resp, ExtractionParams(block_size=4, threshold=3.0))
    m = resp.mean()
    for k in range(rf.n_blocks):
        br, bc = divmod(k, rf.grid[1])
        blk = resp[br * 4:(br + 1) * 4, bc * 4:(bc + 1) * 4].ravel()
        above = blk[blk > m]
        vals = rf.block(0, k)
        if above.size and set(vals) <= set(above.tolist()):
            chi = above.mean()
            assert all(v > m and abs(v - chi) < 3 for v in vals)
        assert vals == sorted(vals, reverse=True)


def test_per_image_L_is_min_over_blocks():
    rf = localize(WORKED, ExtractionParams(block_size=2, threshold=100))
    assert [len(b) for b in rf.blocks(0)] == [1, 1, 4, 4]
    assert per_image_L(rf).lengths.tolist() == [1]
    single = localize(WORKED[2:, 2:], ExtractionParams(block_size=2, threshold=100))
    assert per_image_L(single).lengths.tolist() == [len(single.block(0, 0))]


def test_fit_global_lengths_minimum():
    a = localize(np.array([[9.0, 8.0, 7.0, 0.0]] * 4), ExtractionParams(block_size=4, threshold=10))
    b = localize(np.array([[9.0, 8.0, 7.0, 6.0], [0.0] * 4, [0.0] * 4, [0.0] * 4]),
                 ExtractionParams(block_size=4, threshold=10))
    assert per_image_L(a).lengths.tolist() == [12]
    assert per_image_L(b).lengths.tolist() == [4]
    assert fit_global_lengths([a, b]).lengths.tolist() == [4]
    assert fit_global_lengths([a]) == per_image_L(a)


def test_fit_global_lengths_errors():
    with pytest.raises(DataError):
        fit_global_lengths([])
    a = localize(np.ones((4, 4)), ExtractionParams(block_size=2))
    b = localize(np.ones((4, 6)), ExtractionParams(block_size=2))
    with pytest.raises(DataError):
        fit_global_lengths([a, b])


def test_build_vector_pads_with_last_value():
    rf = localize(WORKED, ExtractionParams(block_size=2, threshold=3))
    gl = GlobalLengths(np.array([3]), 4)
    assert build_vector(rf, gl).tolist() == [8.5] * 3 + [8.5] * 3 + [14, 13, 10] + [16, 15, 12]


def test_build_vector_geometry_mismatch():
    rf = localize(WORKED, ExtractionParams(block_size=2))
    with pytest.raises(DataError):
        build_vector(rf, GlobalLengths(np.array([1, 1]), 4))
    with pytest.raises(DataError):
        build_vector(rf, GlobalLengths(np.array([1]), 9))


def test_common_length_across_images():
    rng = np.random.default_rng(2)
    p = ExtractionParams(block_size=4)
    rfs = [localize(rng.random((3, 16, 12)) * 8, p) for _ in range(5)]
    gl = fit_global_lengths(rfs)
    lengths = {build_vector(rf, gl).size for rf in rfs}
    assert lengths == {gl.vector_length}


def test_default_geometry_block_count():
    gl = GlobalLengths(np.full(40, 2), (92 // 4) * (112 // 4))
    assert gl.n_blocks == 644
    assert gl.vector_length == 40 * 644 * 2


def test_vector_layout_order():
    gl = GlobalLengths(np.array([2, 1]), 2)
    assert_array_equal(vector_layout(gl), [[0, 0, 0], [0, 0, 1], [0, 1, 0], [0, 1, 1],
                                           [1, 0, 0], [1, 1, 0]])
