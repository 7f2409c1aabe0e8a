"""Laboratory for binary linear hashing.

Hash keys in F2^u into 2^ell buckets with a uniformly random linear map,
evaluate every closed-form tail bound and rank distribution that governs the
bucket loads, trace the kernel-chain exponential potential process, and run
seeded Monte Carlo campaigns that confront the empirical tails with the
bounds.
"""

from ._kernels import BACKEND as kernel_backend
from .gf2 import (BitMatrix, BitVector, Subspace, canonical_rep, kernel_basis,
                  mat_vec_mul, rank, sample_outside, sample_surjective_matrix,
                  sample_uniform_matrix)
from .hashing import KeySet, LoadHistogram, bucket_loads, build_key_set, fixed_bucket_load
from .rng import BitStream

__version__ = "0.1.0"

__all__ = [
    "BitMatrix", "BitVector", "Subspace", "BitStream", "KeySet",
    "LoadHistogram", "bucket_loads", "build_key_set", "canonical_rep",
    "fixed_bucket_load", "kernel_backend", "kernel_basis", "mat_vec_mul",
    "rank", "sample_outside", "sample_surjective_matrix",
    "sample_uniform_matrix",
]
