"""The two kernel backends must agree bit for bit, and both must agree with
the scalar reference implementations in the gf2 module."""

import numpy as np
import pytest

from linhash import _kernels
from linhash._kernels import pykernels
from linhash.gf2 import BitMatrix, BitVector, mat_vec_mul, rank
from linhash.hashing import KeySet, build_key_set
from linhash.rng import BitStream

ckernels = None
if _kernels.BACKEND == "c":
    from linhash._kernels import ckernels  # type: ignore


def random_batch(seed, ntrials, nrows, ncols):
    rng = BitStream(seed, 0)
    nwords = max(1, (ncols + 63) // 64)
    mats = np.zeros((ntrials, nrows, nwords), dtype=np.uint64)
    objs = []
    for t in range(ntrials):
        rows = [rng.bits(ncols) for _ in range(nrows)]
        objs.append(BitMatrix(nrows, ncols, tuple(rows)))
        for i, r in enumerate(rows):
            for w in range(nwords):
                mats[t, i, w] = (r >> (64 * w)) & ((1 << 64) - 1)
    return mats, objs


@pytest.mark.parametrize("nrows,ncols", [(3, 5), (8, 8), (10, 13), (5, 70),
                                         (0, 4), (4, 1)])
def test_rank_batch_matches_scalar(nrows, ncols):
    mats, objs = random_batch(31, 40, nrows, ncols)
    got = pykernels.rank_batch(mats, ncols)
    for t, obj in enumerate(objs):
        assert int(got[t]) == rank(obj)
    if ckernels is not None:
        assert np.array_equal(ckernels.rank_batch(mats, ncols), got)


def test_apply_rows_matches_scalar():
    for ncols in (6, 64, 100):
        mats, objs = random_batch(32, 1, 7, ncols)
        rng = BitStream(33, ncols)
        keys = build_key_set("random_distinct_nonzero", u=ncols, m=50, rng=rng)
        got = pykernels.apply_rows(mats[0], keys.key_words)
        for j, key in enumerate(keys.keys):
            assert int(got[j]) == mat_vec_mul(objs[0], key).bits
        if ckernels is not None:
            assert np.array_equal(ckernels.apply_rows(mats[0], keys.key_words), got)


def test_fixed_bucket_counts_matches_scalar():
    ell, u = 4, 9
    mats, objs = random_batch(34, 30, ell, u)
    rng = BitStream(35, 0)
    keys = build_key_set("random_distinct_nonzero", u=u, m=40, rng=rng)
    for target in (0, 5, 15):
        got = pykernels.fixed_bucket_counts(mats, keys.key_words, target)
        for t, obj in enumerate(objs):
            want = sum(1 for k in keys.keys
                       if mat_vec_mul(obj, k).bits == target)
            assert int(got[t]) == want
        if ckernels is not None:
            assert np.array_equal(
                ckernels.fixed_bucket_counts(mats, keys.key_words, target), got)


def test_max_loads_matches_scalar():
    ell, u = 5, 11
    mats, objs = random_batch(36, 25, ell, u)
    rng = BitStream(37, 0)
    keys = build_key_set("random_distinct_nonzero", u=u, m=70, rng=rng)
    got = pykernels.max_loads(mats, keys.key_words, ell)
    for t, obj in enumerate(objs):
        hist = {}
        for k in keys.keys:
            lab = mat_vec_mul(obj, k).bits
            hist[lab] = hist.get(lab, 0) + 1
        assert int(got[t]) == max(hist.values())
    if ckernels is not None:
        assert np.array_equal(ckernels.max_loads(mats, keys.key_words, ell), got)


def test_max_loads_guards():
    mats = np.zeros((1, 2, 1), dtype=np.uint64)
    keys = np.zeros((3, 1), dtype=np.uint64)
    with pytest.raises(ValueError):
        pykernels.max_loads(mats, keys, 3)  # rows != bucket dimension
    if ckernels is not None:
        with pytest.raises(ValueError):
            ckernels.max_loads(mats, keys, 3)


def test_empty_key_set_paths():
    mats = np.zeros((4, 3, 1), dtype=np.uint64)
    keys = np.zeros((0, 1), dtype=np.uint64)
    assert pykernels.fixed_bucket_counts(mats, keys, 0).tolist() == [0] * 4
    assert pykernels.max_loads(mats, keys, 3).tolist() == [0] * 4
    if ckernels is not None:
        assert ckernels.fixed_bucket_counts(mats, keys, 0).tolist() == [0] * 4
        assert ckernels.max_loads(mats, keys, 3).tolist() == [0] * 4


def test_backend_flag_consistent():
    assert _kernels.BACKEND in ("c", "py")
    assert _kernels.rank_batch is _kernels.impl.rank_batch


@pytest.mark.skipif(_kernels.BACKEND != "c",
                    reason="compiled backend unavailable")
def test_campaign_results_identical_across_backends():
    # identical campaign, forced onto the NumPy backend in a subprocess,
    # must serialize to the same bytes
    import os
    import subprocess
    import sys

    script = (
        "from linhash.experiments import (ExperimentSpec, "
        "mc_fixed_bucket_tail, result_row, rows_to_csv)\n"
        "spec = ExperimentSpec(name='xb', u=9, ell=5, m=31, threshold=2,\n"
        "                      trials=3000, master_seed=123)\n"
        "est = mc_fixed_bucket_tail(spec)\n"
        "print(rows_to_csv([result_row('xb', 9, 5, 31, 2, est)]), end='')\n")
    env = dict(os.environ, LINHASH_BACKEND="py")
    fallback = subprocess.run([sys.executable, "-c", script], env=env,
                              capture_output=True, text=True, check=True)

    from linhash.experiments import (ExperimentSpec, mc_fixed_bucket_tail,
                                     result_row, rows_to_csv)
    spec = ExperimentSpec(name="xb", u=9, ell=5, m=31, threshold=2,
                          trials=3000, master_seed=123)
    est = mc_fixed_bucket_tail(spec)
    compiled = rows_to_csv([result_row("xb", 9, 5, 31, 2, est)])
    assert fallback.stdout == compiled
