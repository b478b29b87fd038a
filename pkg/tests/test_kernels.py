from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epimdr import kernels
from epimdr._accel import HAVE_NUMBA


def loop_counts(codes_a, codes_b, pairs, groups, status, n_groups):
    out = np.zeros((len(pairs), n_groups, 9, 2), dtype=np.int64)
    for p, (ia, ib) in enumerate(pairs):
        for i in range(len(groups)):
            a, b, g = codes_a[ia][i], codes_b[ib][i], groups[i]
            if g >= 0 and a != 3 and b != 3:
                out[p, g, 3 * a + b, status[i]] += 1
    return out


def all_variants(codes_a, codes_b, pairs, groups, status, n_groups):
    """Counts from every kernel/backend combination available."""
    packed_a, packed_b = kernels.pack_codes(codes_a), kernels.pack_codes(codes_b)
    masks = kernels.pack_groups(groups, status, n_groups)
    backends = [False] + ([True] if HAVE_NUMBA else [])
    out = {}
    for nb in backends:
        out[("scalar", nb)] = kernels.count_pairs_scalar(codes_a, codes_b, pairs, groups, status, n_groups, use_numba=nb)
        out[("bitpacked", nb)] = kernels.count_pairs_bitpacked(packed_a, packed_b, pairs, masks, use_numba=nb)
    return out


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 200),
    va=st.integers(1, 4),
    vb=st.integers(1, 4),
    n_groups=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_kernels_match_loop(n, va, vb, n_groups, seed):
    rng = np.random.default_rng(seed)
    codes_a = rng.integers(0, 4, (va, n)).astype(np.int8)
    codes_b = rng.integers(0, 4, (vb, n)).astype(np.int8)
    groups = rng.integers(-1, n_groups, n)
    status = rng.integers(0, 2, n).astype(np.int8)
    pairs = np.array([(i, j) for i in range(va) for j in range(vb)])
    expected = loop_counts(codes_a, codes_b, pairs, groups, status, n_groups)
    for name, got in all_variants(codes_a, codes_b, pairs, groups, status, n_groups).items():
        assert np.array_equal(got, expected), name


@pytest.mark.parametrize("n", [1, 63, 64, 65, 128, 1128])
def test_word_boundaries(n):
    rng = np.random.default_rng(n)
    codes = rng.integers(0, 4, (2, n)).astype(np.int8)
    groups = np.zeros(n, dtype=np.int64)
    status = rng.integers(0, 2, n).astype(np.int8)
    pairs = np.array([[0, 1], [1, 0], [0, 0]])
    expected = loop_counts(codes, codes, pairs, groups, status, 1)
    for name, got in all_variants(codes, codes, pairs, groups, status, 1).items():
        assert np.array_equal(got, expected), name


def test_pack_codes_layout():
    codes = np.array([[0, 1, 2, 3, 0]], dtype=np.int8)
    packed = kernels.pack_codes(codes)
    assert packed.shape == (1, 3, 1)
    assert packed[0, :, 0].tolist() == [0b10001, 0b00010, 0b00100]


def test_conservation():
    rng = np.random.default_rng(4)
    codes = rng.integers(0, 4, (3, 300)).astype(np.int8)
    groups = rng.integers(-1, 5, 300)
    status = rng.integers(0, 2, 300).astype(np.int8)
    pairs = np.array([(i, j) for i in range(3) for j in range(3)])
    counts = kernels.count_pairs_bitpacked(
        kernels.pack_codes(codes), kernels.pack_codes(codes), pairs, kernels.pack_groups(groups, status, 5)
    )
    for p, (i, j) in enumerate(pairs):
        observed = (codes[i] != 3) & (codes[j] != 3) & (groups >= 0)
        assert counts[p].sum() == observed.sum()
