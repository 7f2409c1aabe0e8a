"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot kernels on realistic campaign shapes and prints one row
per (kernel, backend) with the achieved trials/second.  The compiled
backend is skipped when the extension is not built.

Usage:
    python benchmarks/compare_backends.py [--trials N] [--repeat K]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from linhash._kernels import pykernels
from linhash.hashing import build_key_set
from linhash.rng import BitStream, stream_seeds, stream_words

try:
    from linhash._kernels import ckernels
except ImportError:
    ckernels = None


def sample_batch(seed: int, ntrials: int, nrows: int, ncols: int) -> np.ndarray:
    nwords = max(1, (ncols + 63) // 64)
    ids = np.arange(ntrials, dtype=np.uint64)
    seeds = stream_seeds(seed, ids)
    counters = np.zeros(ntrials, dtype=np.uint64)
    mats = stream_words(seeds, counters, nrows * nwords) \
        .reshape(ntrials, nrows, nwords).copy()
    rem = ncols & 63
    if rem and nrows:
        mats[:, :, nwords - 1] &= np.uint64((1 << rem) - 1)
    return mats


def bench(fn, repeat: int):
    best = float("inf")
    result = None
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    cases = []

    # rank of 10 x 13 matrices (surjectivity campaigns)
    mats = sample_batch(1, args.trials, 10, 13)
    cases.append(("rank_batch 10x13",
                  lambda impl, m=mats: impl.rank_batch(m, 13)))

    # zero-bucket counting, 256 keys in dimension 9 (sharpness campaigns)
    keys_sharp = build_key_set("subspace_plus_one", d=8, u=9).key_words
    mats_fb = sample_batch(2, args.trials, 8, 9)
    cases.append(("fixed_bucket 8x9 m=256",
                  lambda impl, m=mats_fb, k=keys_sharp:
                  impl.fixed_bucket_counts(m, k, 0)))

    # max load over 2^12 keys in 2^8 buckets (scaled-down load campaigns)
    rng = BitStream(3, 0)
    keys_ml = build_key_set("random_distinct_nonzero", u=20, m=1 << 12,
                            rng=rng).key_words
    mats_ml = sample_batch(4, max(1, args.trials // 50), 8, 20)
    cases.append(("max_loads 8x20 m=4096",
                  lambda impl, m=mats_ml, k=keys_ml:
                  impl.max_loads(m, k, 8)))

    backends = [("py", pykernels)]
    if ckernels is not None:
        backends.append(("c", ckernels))

    print(f"{'kernel':26} {'backend':8} {'seconds':>10} {'trials/s':>12}")
    for name, runner in cases:
        times = {}
        results = {}
        for bname, impl in backends:
            secs, res = bench(lambda impl=impl: runner(impl), args.repeat)
            ntrials = res.shape[0]
            times[bname] = secs
            results[bname] = res
            print(f"{name:26} {bname:8} {secs:10.4f} {ntrials / secs:12.0f}")
        if len(results) == 2:
            assert np.array_equal(results["py"], results["c"]), \
                f"backend mismatch in {name}"
            print(f"{name:26} speedup  {times['py'] / times['c']:10.1f}x")
    if ckernels is None:
        print("compiled backend not built; only the fallback was timed")


if __name__ == "__main__":
    main()
