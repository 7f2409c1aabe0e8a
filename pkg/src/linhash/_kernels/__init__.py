"""Kernel backend selection.

The hot loops (batched GF(2) rank, fixed-bucket counting, max-load
histograms) exist twice: a compiled Cython extension and a vectorized NumPy
fallback with identical integer results.  The compiled backend is preferred
when present; set LINHASH_BACKEND=py or LINHASH_BACKEND=c to force one.
"""

import os

from . import pykernels

_choice = os.environ.get("LINHASH_BACKEND", "auto").lower()
if _choice not in ("auto", "c", "py"):
    raise RuntimeError(f"LINHASH_BACKEND must be 'auto', 'c', or 'py', "
                       f"not {_choice!r}")

impl = None
if _choice in ("auto", "c"):
    try:
        from . import ckernels as impl  # type: ignore[no-redef]
    except ImportError:
        if _choice == "c":
            raise
if impl is None:
    impl = pykernels

BACKEND = "py" if impl is pykernels else "c"

rank_batch = impl.rank_batch
apply_rows = impl.apply_rows
fixed_bucket_counts = impl.fixed_bucket_counts
max_loads = impl.max_loads

__all__ = ["BACKEND", "rank_batch", "apply_rows", "fixed_bucket_counts",
           "max_loads", "pykernels"]
