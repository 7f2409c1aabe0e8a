# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the Monte Carlo hot loops.

Same contracts as the NumPy fallback in pykernels.py; the per-trial loops run
without the GIL so thread pools scale.
"""

import numpy as np

from libc.stdint cimport int64_t, uint8_t, uint64_t

cdef extern from *:
    """
    #if defined(__GNUC__) || defined(__clang__)
    static inline int lh_popcount64(unsigned long long x) {
        return __builtin_popcountll(x);
    }
    #else
    static inline int lh_popcount64(unsigned long long x) {
        x = x - ((x >> 1) & 0x5555555555555555ULL);
        x = (x & 0x3333333333333333ULL) + ((x >> 2) & 0x3333333333333333ULL);
        x = (x + (x >> 4)) & 0x0f0f0f0f0f0f0f0fULL;
        return (int)((x * 0x0101010101010101ULL) >> 56);
    }
    #endif
    """
    int lh_popcount64(unsigned long long x) nogil


def rank_batch(mats, int ncols):
    """GF(2) row rank of every matrix in the batch."""
    cdef uint64_t[:, :, ::1] m = np.ascontiguousarray(mats, dtype=np.uint64)
    cdef Py_ssize_t ntrials = m.shape[0], nrows = m.shape[1], nwords = m.shape[2]
    out = np.zeros(ntrials, dtype=np.uint8)
    cdef uint8_t[::1] out_v = out
    if ntrials == 0 or nrows == 0 or ncols == 0:
        return out
    work_arr = np.empty((nrows, nwords), dtype=np.uint64)
    cdef uint64_t[:, ::1] work = work_arr
    cdef Py_ssize_t t, i, w, c, piv, rnk, wi, bi
    cdef uint64_t tmp
    with nogil:
        for t in range(ntrials):
            for i in range(nrows):
                for w in range(nwords):
                    work[i, w] = m[t, i, w]
            rnk = 0
            for c in range(ncols):
                wi = c >> 6
                bi = c & 63
                piv = -1
                for i in range(rnk, nrows):
                    if (work[i, wi] >> bi) & 1:
                        piv = i
                        break
                if piv < 0:
                    continue
                if piv != rnk:
                    for w in range(nwords):
                        tmp = work[rnk, w]
                        work[rnk, w] = work[piv, w]
                        work[piv, w] = tmp
                for i in range(nrows):
                    if i != rnk and ((work[i, wi] >> bi) & 1):
                        for w in range(nwords):
                            work[i, w] ^= work[rnk, w]
                rnk += 1
                if rnk == nrows:
                    break
            out_v[t] = <uint8_t>rnk
    return out


def apply_rows(rows, keys):
    """Labels of every key under one matrix."""
    cdef uint64_t[:, ::1] r = np.ascontiguousarray(rows, dtype=np.uint64)
    cdef uint64_t[:, ::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t nrows = r.shape[0], nwords = r.shape[1], nkeys = k.shape[0]
    out = np.zeros(nkeys, dtype=np.uint64)
    cdef uint64_t[::1] out_v = out
    cdef Py_ssize_t i, j, w
    cdef uint64_t acc, lab
    with nogil:
        for j in range(nkeys):
            lab = 0
            for i in range(nrows):
                acc = 0
                for w in range(nwords):
                    acc ^= r[i, w] & k[j, w]
                lab |= (<uint64_t>(lh_popcount64(acc) & 1)) << i
            out_v[j] = lab
    return out


def fixed_bucket_counts(mats, keys, target):
    """Per trial, how many keys land on the label ``target``."""
    cdef uint64_t[:, :, ::1] m = np.ascontiguousarray(mats, dtype=np.uint64)
    cdef uint64_t[:, ::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t ntrials = m.shape[0], nrows = m.shape[1], nwords = m.shape[2]
    cdef Py_ssize_t nkeys = k.shape[0]
    cdef uint64_t tgt = <uint64_t>target
    out = np.zeros(ntrials, dtype=np.int64)
    cdef int64_t[::1] out_v = out
    cdef Py_ssize_t t, i, j, w
    cdef uint64_t acc
    cdef int64_t cnt
    cdef bint match
    with nogil:
        for t in range(ntrials):
            cnt = 0
            for j in range(nkeys):
                match = True
                for i in range(nrows):
                    acc = 0
                    for w in range(nwords):
                        acc ^= m[t, i, w] & k[j, w]
                    if <uint64_t>(lh_popcount64(acc) & 1) != ((tgt >> i) & 1):
                        match = False
                        break
                if match:
                    cnt += 1
            out_v[t] = cnt
    return out


def max_loads(mats, keys, int nbuckets_log2):
    """Per trial, the maximum label multiplicity over the key set."""
    cdef uint64_t[:, :, ::1] m = np.ascontiguousarray(mats, dtype=np.uint64)
    cdef uint64_t[:, ::1] k = np.ascontiguousarray(keys, dtype=np.uint64)
    cdef Py_ssize_t ntrials = m.shape[0], nrows = m.shape[1], nwords = m.shape[2]
    cdef Py_ssize_t nkeys = k.shape[0]
    if nrows != nbuckets_log2:
        raise ValueError("row count must equal the bucket-space dimension")
    if nbuckets_log2 > 26:
        raise ValueError("histogram kernel supports at most 2^26 buckets")
    out = np.zeros(ntrials, dtype=np.int64)
    cdef int64_t[::1] out_v = out
    if nkeys == 0:
        return out
    counts_arr = np.zeros(1 << nbuckets_log2, dtype=np.int64)
    cdef int64_t[::1] counts = counts_arr
    labels_arr = np.empty(nkeys, dtype=np.uint64)
    cdef uint64_t[::1] labels = labels_arr
    cdef Py_ssize_t t, i, j, w
    cdef uint64_t acc, lab
    cdef int64_t best, c
    with nogil:
        for t in range(ntrials):
            best = 0
            for j in range(nkeys):
                lab = 0
                for i in range(nrows):
                    acc = 0
                    for w in range(nwords):
                        acc ^= m[t, i, w] & k[j, w]
                    lab |= (<uint64_t>(lh_popcount64(acc) & 1)) << i
                labels[j] = lab
                c = counts[lab] + 1
                counts[lab] = c
                if c > best:
                    best = c
            for j in range(nkeys):
                counts[labels[j]] = 0
            out_v[t] = best
    return out
