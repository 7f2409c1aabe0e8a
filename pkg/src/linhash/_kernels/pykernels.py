"""NumPy fallback kernels for the Monte Carlo hot loops.

Matrices arrive as (trials, rows, words) uint64 arrays, one 64-bit word run
per row, and key sets as (keys, words) uint64 arrays.  Everything here is
vectorized across the trial axis; results are exact integers, so they match
the compiled backend bit for bit.
"""

from __future__ import annotations

import numpy as np

_ONE = np.uint64(1)


def _check_mats(mats: np.ndarray) -> np.ndarray:
    if mats.ndim != 3 or mats.dtype != np.uint64:
        raise ValueError("matrices must be a (trials, rows, words) uint64 array")
    return np.ascontiguousarray(mats)


def _parity_bits(mats: np.ndarray, keys: np.ndarray, i: int) -> np.ndarray:
    """Output bit i of every (trial, key) pair: parity of AND over words."""
    acc = mats[:, i, 0][:, None] & keys[None, :, 0]
    for w in range(1, keys.shape[1]):
        acc = acc ^ (mats[:, i, w][:, None] & keys[None, :, w])
    return (np.bitwise_count(acc) & _ONE).astype(np.uint64)


def rank_batch(mats: np.ndarray, ncols: int) -> np.ndarray:
    """GF(2) row rank of every matrix in the batch."""
    work = _check_mats(mats).copy()
    ntrials, nrows, _ = work.shape
    if ntrials == 0 or nrows == 0 or ncols == 0:
        return np.zeros(ntrials, dtype=np.uint8)
    cur = np.zeros(ntrials, dtype=np.int64)
    trial_idx = np.arange(ntrials)
    row_idx = np.arange(nrows)
    for c in range(ncols):
        wi, bi = divmod(c, 64)
        col = (work[:, :, wi] >> np.uint64(bi)) & _ONE
        cand = (col == 1) & (row_idx[None, :] >= cur[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        piv = cand.argmax(axis=1)
        ti = trial_idx[has]
        r0 = cur[has]
        p0 = piv[has]
        tmp = work[ti, r0].copy()
        work[ti, r0] = work[ti, p0]
        work[ti, p0] = tmp
        col = (work[:, :, wi] >> np.uint64(bi)) & _ONE
        elim = (col == 1) & has[:, None]
        elim[trial_idx, np.minimum(cur, nrows - 1)] = False
        te, re = np.nonzero(elim)
        if te.size:
            work[te, re] ^= work[te, cur[te]]
        cur += has
        if (cur == nrows).all():
            break
    return cur.astype(np.uint8)


def apply_rows(rows: np.ndarray, keys: np.ndarray) -> np.ndarray:
    """Labels of every key under one matrix: bit i = parity of AND(row i, key)."""
    mats = np.ascontiguousarray(rows, dtype=np.uint64)[None, :, :]
    nrows = mats.shape[1]
    labels = np.zeros(keys.shape[0], dtype=np.uint64)
    for i in range(nrows):
        labels |= _parity_bits(mats, keys, i)[0] << np.uint64(i)
    return labels


def fixed_bucket_counts(mats: np.ndarray, keys: np.ndarray,
                        target: int) -> np.ndarray:
    """Per trial, how many keys land on the label ``target``."""
    mats = _check_mats(mats)
    ntrials, nrows, _ = mats.shape
    if keys.shape[0] == 0:
        return np.zeros(ntrials, dtype=np.int64)
    ok = np.ones((ntrials, keys.shape[0]), dtype=bool)
    for i in range(nrows):
        want = np.uint64((target >> i) & 1)
        ok &= _parity_bits(mats, keys, i) == want
    return ok.sum(axis=1, dtype=np.int64)


def max_loads(mats: np.ndarray, keys: np.ndarray, nbuckets_log2: int) -> np.ndarray:
    """Per trial, the maximum label multiplicity over the key set."""
    mats = _check_mats(mats)
    ntrials, nrows, _ = mats.shape
    if nrows != nbuckets_log2:
        raise ValueError("row count must equal the bucket-space dimension")
    if nbuckets_log2 > 26:
        raise ValueError("histogram kernel supports at most 2^26 buckets")
    if keys.shape[0] == 0:
        return np.zeros(ntrials, dtype=np.int64)
    labels = np.zeros((ntrials, keys.shape[0]), dtype=np.uint64)
    for i in range(nrows):
        labels |= _parity_bits(mats, keys, i) << np.uint64(i)
    out = np.empty(ntrials, dtype=np.int64)
    nbins = 1 << nbuckets_log2
    for t in range(ntrials):
        out[t] = np.bincount(labels[t].astype(np.int64), minlength=nbins).max()
    return out
