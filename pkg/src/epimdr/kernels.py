"""Hot counting kernels.

Both kernels fill a ``(P, G, 9, 2)`` count tensor: for every requested
variant pair ``p``, patient group ``g`` (a CV fold, or the training set),
joint genotype cell ``3*code_a + code_b`` and status (0 control, 1 case).
Patients with group ``-1`` or a ``MISSING`` code in either variant are not
counted.

* scalar: one pass over patients per pair.
* bitpacked: three patient bitmasks per variant and one mask per
  (group, status); a count is ``popcount(a & b & mask)`` summed over words.

Each kernel has a numba ``@njit(nogil=True)`` version and a pure numpy
version with identical results; ``EPIMDR_DISABLE_NUMBA=1`` selects numpy.
The numba versions release the GIL so the pair engine can run them on
several threads at once.
"""

from __future__ import annotations

import numpy as np

from ._accel import USE_NUMBA, njit

N_CELLS = 9
MISSING = 3
WORD_BITS = 64

_CHUNK = 512


def n_words(n_patients: int) -> int:
    return max(1, (n_patients + WORD_BITS - 1) // WORD_BITS)


def _pack_bool_rows(bits: np.ndarray, words: int) -> np.ndarray:
    """Pack the last axis of a boolean array into little-endian uint64 words."""
    packed = np.packbits(bits, axis=-1, bitorder="little")
    pad = words * 8 - packed.shape[-1]
    if pad:
        widths = [(0, 0)] * (packed.ndim - 1) + [(0, pad)]
        packed = np.pad(packed, widths)
    return np.ascontiguousarray(packed).view("<u8").astype(np.uint64, copy=False)


def pack_codes(codes: np.ndarray) -> np.ndarray:
    """``(V, N)`` genotype codes to ``(V, 3, W)`` per-genotype bitmasks."""
    codes = np.asarray(codes)
    words = n_words(codes.shape[-1])
    bits = np.stack([codes == c for c in range(3)], axis=1)
    return np.ascontiguousarray(_pack_bool_rows(bits, words))


def pack_groups(groups: np.ndarray, status: np.ndarray, n_groups: int) -> np.ndarray:
    """``(G, 2, W)`` masks of patients in group ``g`` with status ``s``."""
    groups = np.asarray(groups)
    status = np.asarray(status)
    words = n_words(groups.shape[0])
    bits = np.stack(
        [np.stack([(groups == g) & (status == s) for s in (0, 1)]) for g in range(n_groups)]
    )
    return np.ascontiguousarray(_pack_bool_rows(bits, words))


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)
_ONE = np.uint64(1)
_TWO = np.uint64(2)
_FOUR = np.uint64(4)
_S56 = np.uint64(56)


@njit(nogil=True, cache=True)
def _popcount64(x):
    x = x - ((x >> _ONE) & _M1)
    x = (x & _M2) + ((x >> _TWO) & _M2)
    x = (x + (x >> _FOUR)) & _M4
    return (x * _H01) >> _S56


@njit(nogil=True, cache=True)
def _count_scalar_nb(codes_a, codes_b, pairs, groups, status, n_groups):
    n_pairs = pairs.shape[0]
    n_pat = groups.shape[0]
    out = np.zeros((n_pairs, n_groups, 9, 2), dtype=np.int64)
    for p in range(n_pairs):
        ga = codes_a[pairs[p, 0]]
        gb = codes_b[pairs[p, 1]]
        for i in range(n_pat):
            g = groups[i]
            a = ga[i]
            b = gb[i]
            if g < 0 or a == MISSING or b == MISSING:
                continue
            out[p, g, 3 * a + b, status[i]] += 1
    return out


@njit(nogil=True, cache=True)
def _count_bitpacked_nb(packed_a, packed_b, pairs, group_masks):
    n_pairs = pairs.shape[0]
    n_groups = group_masks.shape[0]
    n_w = group_masks.shape[2]
    out = np.zeros((n_pairs, n_groups, 9, 2), dtype=np.int64)
    for p in range(n_pairs):
        va = packed_a[pairs[p, 0]]
        vb = packed_b[pairs[p, 1]]
        for ca in range(3):
            for cb in range(3):
                cell = 3 * ca + cb
                for w in range(n_w):
                    ab = va[ca, w] & vb[cb, w]
                    if ab == 0:
                        continue
                    for g in range(n_groups):
                        out[p, g, cell, 0] += np.int64(_popcount64(ab & group_masks[g, 0, w]))
                        out[p, g, cell, 1] += np.int64(_popcount64(ab & group_masks[g, 1, w]))
    return out


# ---------------------------------------------------------------------------
# numpy kernels
# ---------------------------------------------------------------------------


def _count_scalar_np(codes_a, codes_b, pairs, groups, status, n_groups):
    n_pairs = pairs.shape[0]
    out = np.zeros((n_pairs, n_groups * 18), dtype=np.int64)
    groups = groups.astype(np.int64)
    base = groups * 18 + status.astype(np.int64)
    for lo in range(0, n_pairs, _CHUNK):
        hi = min(lo + _CHUNK, n_pairs)
        ca = codes_a[pairs[lo:hi, 0]].astype(np.int64)
        cb = codes_b[pairs[lo:hi, 1]].astype(np.int64)
        valid = (ca != MISSING) & (cb != MISSING) & (groups >= 0)
        idx = base + (3 * ca + cb) * 2 + (np.arange(hi - lo)[:, None] * n_groups * 18)
        counts = np.bincount(idx[valid], minlength=(hi - lo) * n_groups * 18)
        out[lo:hi] = counts.reshape(hi - lo, n_groups * 18)
    return out.reshape(n_pairs, n_groups, 9, 2)


def _count_bitpacked_np(packed_a, packed_b, pairs, group_masks):
    n_pairs = pairs.shape[0]
    n_groups, _, n_w = group_masks.shape
    out = np.zeros((n_pairs, n_groups, 9, 2), dtype=np.int64)
    masks = group_masks[None, :, None, :, :]
    for lo in range(0, n_pairs, _CHUNK):
        hi = min(lo + _CHUNK, n_pairs)
        a = packed_a[pairs[lo:hi, 0]]
        b = packed_b[pairs[lo:hi, 1]]
        ab = (a[:, :, None, :] & b[:, None, :, :]).reshape(hi - lo, 9, n_w)
        hits = np.bitwise_count(ab[:, None, :, None, :] & masks)
        out[lo:hi] = hits.sum(axis=-1, dtype=np.int64)
    return out


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _as_pairs(pairs) -> np.ndarray:
    pairs = np.ascontiguousarray(pairs, dtype=np.int64)
    return pairs.reshape(-1, 2)


def count_pairs_scalar(codes_a, codes_b, pairs, groups, status, n_groups, *, use_numba=None):
    """Per-patient counting for each ``(index_a, index_b)`` row of ``pairs``."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    args = (
        np.ascontiguousarray(codes_a, dtype=np.int8),
        np.ascontiguousarray(codes_b, dtype=np.int8),
        _as_pairs(pairs),
        np.ascontiguousarray(groups, dtype=np.int64),
        np.ascontiguousarray(status, dtype=np.int8),
        int(n_groups),
    )
    if use_numba:
        return _count_scalar_nb(*args)
    return _count_scalar_np(*args)


def count_pairs_bitpacked(packed_a, packed_b, pairs, group_masks, *, use_numba=None):
    """Popcount counting over masks from :func:`pack_codes` / :func:`pack_groups`."""
    use_numba = USE_NUMBA if use_numba is None else use_numba
    args = (
        np.ascontiguousarray(packed_a, dtype=np.uint64),
        np.ascontiguousarray(packed_b, dtype=np.uint64),
        _as_pairs(pairs),
        np.ascontiguousarray(group_masks, dtype=np.uint64),
    )
    if use_numba:
        return _count_bitpacked_nb(*args)
    return _count_bitpacked_np(*args)
