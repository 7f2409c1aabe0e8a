"""Key sets, bucket loads, and the load statistics of a linear hash map.

A key set is an ordered collection of distinct vectors; unless explicitly
permitted, the zero vector is excluded because the fixed-bucket tail bounds
require nonzero keys (the zero key would sit in bucket zero under every
linear map).  Bucket loads are the fiber sizes |h^{-1}(y) ∩ S|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import _kernels
from .gf2 import BitMatrix, BitVector, mat_vec_mul
from .rng import BitStream


@dataclass(frozen=True)
class KeySet:
    """Distinct keys in F2^ambient_dim, zero allowed only when flagged."""

    ambient_dim: int
    keys: tuple[BitVector, ...]
    allow_zero: bool = False

    def __post_init__(self):
        seen = set()
        for k in self.keys:
            if k.dim != self.ambient_dim:
                raise ValueError("key dimension mismatch")
            if k.bits in seen:
                raise ValueError("keys must be pairwise distinct")
            if k.bits == 0 and not self.allow_zero:
                raise ValueError("zero key present but allow_zero is false")
            seen.add(k.bits)

    def __len__(self) -> int:
        return len(self.keys)

    @cached_property
    def key_words(self) -> np.ndarray:
        """Keys packed into a (m, ceil(u/64)) uint64 array for the kernels."""
        nwords = max(1, (self.ambient_dim + 63) // 64)
        out = np.zeros((len(self.keys), nwords), dtype=np.uint64)
        mask = (1 << 64) - 1
        for i, k in enumerate(self.keys):
            for w in range(nwords):
                out[i, w] = (k.bits >> (64 * w)) & mask
        return out

    def to_text(self) -> str:
        lines = [f"{self.ambient_dim} {len(self.keys)} "
                 f"{1 if self.allow_zero else 0}"]
        lines.extend(k.to_hex() for k in self.keys)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "KeySet":
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty key-set file")
        head = lines[0].split()
        if len(head) != 3:
            raise ValueError("key-set header must be 'u m allow_zero'")
        u, m = int(head[0]), int(head[1])
        if head[2] in ("0", "false"):
            allow_zero = False
        elif head[2] in ("1", "true"):
            allow_zero = True
        else:
            raise ValueError(f"bad allow_zero field {head[2]!r}")
        if len(lines) - 1 != m:
            raise ValueError(f"expected {m} key lines, got {len(lines) - 1}")
        keys = tuple(BitVector.from_hex(u, ln) for ln in lines[1:])
        return cls(u, keys, allow_zero)

    def save(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path) -> "KeySet":
        with open(path, encoding="ascii") as fh:
            return cls.from_text(fh.read())


@dataclass(frozen=True)
class LoadHistogram:
    """Map from bucket label to positive load, plus the derived maximum."""

    bucket_dim: int
    loads: dict[BitVector, int]
    total_keys: int = field(init=False)
    max_load: int = field(init=False)

    def __post_init__(self):
        total = 0
        biggest = 0
        for label, count in self.loads.items():
            if label.dim != self.bucket_dim:
                raise ValueError("bucket label dimension mismatch")
            if count <= 0:
                raise ValueError("zero-load buckets must be absent")
            total += count
            biggest = max(biggest, count)
        object.__setattr__(self, "total_keys", total)
        object.__setattr__(self, "max_load", biggest)

    def load_of(self, y: BitVector) -> int:
        if y.dim != self.bucket_dim:
            raise ValueError("bucket label dimension mismatch")
        return self.loads.get(y, 0)

    def to_csv(self) -> str:
        """Rows sorted by descending load, then by label."""
        rows = sorted(self.loads.items(),
                      key=lambda kv: (-kv[1], kv[0].bits))
        out = ["bucket_hex,load"]
        out.extend(f"{label.to_hex()},{count}" for label, count in rows)
        return "\n".join(out) + "\n"


def bucket_loads(h: BitMatrix, s: KeySet) -> LoadHistogram:
    """Load of every nonempty bucket: loads[y] = #{x in S : h x = y}."""
    if h.cols != s.ambient_dim:
        raise ValueError(f"dimension mismatch: map has {h.cols} input "
                         f"coordinates, keys have {s.ambient_dim}")
    counts: dict[int, int] = {}
    if h.rows <= 63 and len(s.keys) > 0:
        labels = _kernels.apply_rows(h.to_words(), s.key_words)
        for lab in labels.tolist():
            counts[lab] = counts.get(lab, 0) + 1
    else:
        for k in s.keys:
            lab = mat_vec_mul(h, k).bits
            counts[lab] = counts.get(lab, 0) + 1
    return LoadHistogram(h.rows, {BitVector(h.rows, lab): c
                                  for lab, c in counts.items()})


def fixed_bucket_load(h: BitMatrix, s: KeySet, y: BitVector) -> int:
    """Load of the one prescribed bucket y (zero when no key lands there)."""
    if y.dim != h.rows:
        raise ValueError("bucket label dimension mismatch")
    if h.cols != s.ambient_dim:
        raise ValueError("dimension mismatch between map and keys")
    if h.rows <= 63 and len(s.keys) > 0:
        mats = h.to_words()[None, :, :]
        return int(_kernels.fixed_bucket_counts(mats, s.key_words, y.bits)[0])
    return sum(1 for k in s.keys if mat_vec_mul(h, k) == y)


def build_key_set(kind: str, *, u: int | None = None, m: int | None = None,
                  d: int | None = None, rng: BitStream | None = None,
                  path=None) -> KeySet:
    """Construct a key set.

    Kinds:
      random_distinct_nonzero -- m distinct uniform nonzero vectors of F2^u,
        by rejection until distinct (requires m <= 2^u - 1 and an rng).
      subspace_plus_one -- all 2^d - 1 nonzero vectors of the subspace
        spanned by the first d coordinates, plus the (d+1)-th standard basis
        vector; m, when given, must equal 2^d, and u must be at least d+1.
      from_file -- parse a key-set file and validate it.
    """
    if kind == "random_distinct_nonzero":
        if u is None or m is None or rng is None:
            raise ValueError("random_distinct_nonzero needs u, m, and rng")
        if m > (1 << u) - 1:
            raise ValueError(f"cannot pick {m} distinct nonzero vectors "
                             f"in dimension {u}")
        seen: set[int] = set()
        keys: list[BitVector] = []
        while len(keys) < m:
            bits = rng.bits(u)
            if bits == 0 or bits in seen:
                continue
            seen.add(bits)
            keys.append(BitVector(u, bits))
        return KeySet(u, tuple(keys))
    if kind == "subspace_plus_one":
        if d is None:
            raise ValueError("subspace_plus_one needs the subspace dimension d")
        if m is not None and m != 1 << d:
            raise ValueError("subspace_plus_one key count must be a power of "
                             f"two: 2^{d} != {m}")
        if u is None:
            u = d + 1
        if u < d + 1:
            raise ValueError("subspace_plus_one needs u >= d + 1")
        keys = [BitVector(u, bits) for bits in range(1, 1 << d)]
        keys.append(BitVector.unit(u, d))
        return KeySet(u, tuple(keys))
    if kind == "from_file":
        if path is None:
            raise ValueError("from_file needs a path")
        return KeySet.load(path)
    raise ValueError(f"unknown key-set kind {kind!r}")
