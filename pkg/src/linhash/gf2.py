"""Bit-packed linear algebra over the two-element field.

Vectors are Python integers used as bitsets: coordinate i is bit i, so
coordinate 0 is the least significant bit of word 0 and padding bits above
the dimension are always zero.  Matrices are tuples of row bitsets.  This
representation makes a matrix-vector product one AND plus one popcount per
row, and keeps every object hashable and immutable.

Subspaces carry a reduced-row-echelon basis, so coset representatives are a
single elimination pass and are unique without tie-breaking.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .rng import BitStream


def _lsb_index(bits: int) -> int:
    """Index of the lowest set bit; caller guarantees bits != 0."""
    return (bits & -bits).bit_length() - 1


def _hex_digits(dim: int) -> int:
    return (dim + 3) // 4


@dataclass(frozen=True)
class BitVector:
    """A vector in F2^dim, packed little-endian into a Python int."""

    dim: int
    bits: int

    def __post_init__(self):
        if self.dim < 0:
            raise ValueError("dimension must be nonnegative")
        if not 0 <= self.bits < (1 << self.dim):
            raise ValueError("padding bits above the dimension must be zero")

    @classmethod
    def zeros(cls, dim: int) -> "BitVector":
        return cls(dim, 0)

    @classmethod
    def unit(cls, dim: int, index: int) -> "BitVector":
        if not 0 <= index < dim:
            raise ValueError("unit index out of range")
        return cls(dim, 1 << index)

    @classmethod
    def from_coords(cls, coords) -> "BitVector":
        coords = list(coords)
        bits = 0
        for i, c in enumerate(coords):
            if c not in (0, 1):
                raise ValueError("coordinates must be 0 or 1")
            bits |= c << i
        return cls(len(coords), bits)

    @classmethod
    def from_hex(cls, dim: int, text: str) -> "BitVector":
        text = text.strip()
        if len(text) != _hex_digits(dim):
            raise ValueError(
                f"expected {_hex_digits(dim)} hex digits for dimension {dim}, "
                f"got {len(text)}")
        bits = int(text, 16) if text else 0
        return cls(dim, bits)

    def to_hex(self) -> str:
        """Lowercase hex, ceil(dim/4) digits, coordinate 0 = least significant bit."""
        nd = _hex_digits(self.dim)
        return format(self.bits, f"0{nd}x") if nd else ""

    def coord(self, i: int) -> int:
        if not 0 <= i < self.dim:
            raise IndexError("coordinate out of range")
        return (self.bits >> i) & 1

    def coords(self) -> tuple[int, ...]:
        return tuple((self.bits >> i) & 1 for i in range(self.dim))

    def weight(self) -> int:
        return self.bits.bit_count()

    def is_zero(self) -> bool:
        return self.bits == 0

    def __xor__(self, other: "BitVector") -> "BitVector":
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        return BitVector(self.dim, self.bits ^ other.bits)

    def to_words(self) -> list[int]:
        """Little-endian 64-bit words, ceil(dim/64) of them."""
        nwords = max(1, (self.dim + 63) // 64) if self.dim else 0
        return [(self.bits >> (64 * w)) & ((1 << 64) - 1) for w in range(nwords)]


@dataclass(frozen=True)
class BitMatrix:
    """A rows x cols matrix over F2, one bitset per row."""

    rows: int
    cols: int
    row_bits: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError("shape must be nonnegative")
        if len(self.row_bits) != self.rows:
            raise ValueError("row count does not match shape")
        limit = 1 << self.cols
        for r in self.row_bits:
            if not 0 <= r < limit:
                raise ValueError("row has padding bits above the column count")

    @classmethod
    def zero(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_rows(cls, cols: int, rows) -> "BitMatrix":
        bits = []
        for r in rows:
            if isinstance(r, BitVector):
                if r.dim != cols:
                    raise ValueError("row dimension mismatch")
                bits.append(r.bits)
            else:
                bits.append(int(r))
        return cls(len(bits), cols, tuple(bits))

    def row(self, i: int) -> BitVector:
        return BitVector(self.cols, self.row_bits[i])

    def column_bits(self, j: int) -> int:
        """Column j as a bitset over row indices."""
        out = 0
        for i, r in enumerate(self.row_bits):
            out |= ((r >> j) & 1) << i
        return out

    def to_text(self) -> str:
        lines = [f"{self.rows} {self.cols}"]
        lines.extend(self.row(i).to_hex() for i in range(self.rows))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "BitMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty matrix file")
        head = lines[0].split()
        if len(head) != 2:
            raise ValueError("matrix header must be 'rows cols'")
        rows, cols = int(head[0]), int(head[1])
        if len(lines) - 1 != rows:
            raise ValueError(f"expected {rows} row lines, got {len(lines) - 1}")
        bits = tuple(BitVector.from_hex(cols, ln).bits for ln in lines[1:])
        return cls(rows, cols, bits)

    def to_words(self) -> np.ndarray:
        """Rows packed into a (rows, ceil(cols/64)) uint64 array."""
        nwords = max(1, (self.cols + 63) // 64)
        out = np.zeros((self.rows, nwords), dtype=np.uint64)
        for i, r in enumerate(self.row_bits):
            for w in range(nwords):
                out[i, w] = (r >> (64 * w)) & ((1 << 64) - 1)
        return out


def mat_vec_mul(m: BitMatrix, x: BitVector) -> BitVector:
    """Apply the linear map: result coordinate i is the parity of AND(row i, x)."""
    if x.dim != m.cols:
        raise ValueError(f"dimension mismatch: matrix has {m.cols} columns, "
                         f"vector has dimension {x.dim}")
    bits = 0
    for i, r in enumerate(m.row_bits):
        bits |= ((r & x.bits).bit_count() & 1) << i
    return BitVector(m.rows, bits)


def _rref(rows, ncols: int) -> list[tuple[int, int]]:
    """Reduced row echelon form of a list of row bitsets.

    Returns (pivot, row) pairs sorted by pivot; pivots are the lowest set
    bit of each reduced row, and every pivot column has a single one.
    """
    basis: list[tuple[int, int]] = []  # sorted by pivot
    for raw in rows:
        cur = raw
        for p, b in basis:
            if (cur >> p) & 1:
                cur ^= b
        if cur == 0:
            continue
        p = _lsb_index(cur)
        for idx, (pi, bi) in enumerate(basis):
            if (bi >> p) & 1:
                basis[idx] = (pi, bi ^ cur)
        bisect.insort(basis, (p, cur))
    return basis


def rank(m: BitMatrix) -> int:
    """Row rank over F2 (equals cols minus the kernel dimension)."""
    return len(_rref(m.row_bits, m.cols))


class Subspace:
    """A subspace of F2^ambient_dim held as a reduced-row-echelon basis.

    The basis rows are linearly independent, each pivot column contains a
    single one, and pivots are strictly increasing.  A vector belongs to the
    subspace exactly when it reduces to zero against the basis.
    """

    __slots__ = ("ambient_dim", "basis", "pivots")

    def __init__(self, ambient_dim: int, basis=(), pivots=None):
        if ambient_dim < 0:
            raise ValueError("ambient dimension must be nonnegative")
        basis = tuple(int(b) for b in basis)
        if pivots is None:
            pivots = tuple(_lsb_index(b) for b in basis)
        else:
            pivots = tuple(pivots)
        self.ambient_dim = ambient_dim
        self.basis = basis
        self.pivots = pivots
        self._validate()

    def _validate(self):
        limit = 1 << self.ambient_dim
        seen = -1
        for p, b in zip(self.pivots, self.basis, strict=True):
            if not 0 < b < limit:
                raise ValueError("basis row out of range or zero")
            if _lsb_index(b) != p:
                raise ValueError("pivot is not the lowest set bit of its row")
            if p <= seen:
                raise ValueError("pivots must be strictly increasing")
            seen = p
        pivset = set(self.pivots)
        for p in pivset:
            ones = sum((b >> p) & 1 for b in self.basis)
            if ones != 1:
                raise ValueError("pivot column must contain a single one")

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim)

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, tuple(1 << i for i in range(ambient_dim)))

    @classmethod
    def span(cls, ambient_dim: int, vectors) -> "Subspace":
        rows = []
        for v in vectors:
            rows.append(v.bits if isinstance(v, BitVector) else int(v))
        rref = _rref(rows, ambient_dim)
        return cls(ambient_dim, tuple(b for _, b in rref),
                   tuple(p for p, _ in rref))

    @property
    def dim(self) -> int:
        return len(self.basis)

    def reduce_bits(self, bits: int) -> int:
        """Unique member of the coset bits + V with zeros at every pivot."""
        for p, b in zip(self.pivots, self.basis):
            if (bits >> p) & 1:
                bits ^= b
        return bits

    def contains_bits(self, bits: int) -> bool:
        return self.reduce_bits(bits) == 0

    def contains(self, x: BitVector) -> bool:
        if x.dim != self.ambient_dim:
            raise ValueError("dimension mismatch")
        return self.contains_bits(x.bits)

    def extend(self, x: BitVector) -> "Subspace":
        """Subspace spanned by this one plus x; x must lie outside."""
        if x.dim != self.ambient_dim:
            raise ValueError("dimension mismatch")
        cur = self.reduce_bits(x.bits)
        if cur == 0:
            raise ValueError("vector already belongs to the subspace")
        p = _lsb_index(cur)
        rows = [(b ^ cur) if ((b >> p) & 1) else b for b in self.basis]
        pairs = sorted(zip(list(self.pivots) + [p], rows + [cur]))
        return Subspace(self.ambient_dim, tuple(b for _, b in pairs),
                        tuple(q for q, _ in pairs))

    def free_columns(self) -> tuple[int, ...]:
        """Non-pivot coordinates, ascending; they index the quotient space."""
        pivset = set(self.pivots)
        return tuple(j for j in range(self.ambient_dim) if j not in pivset)

    def basis_vectors(self) -> tuple[BitVector, ...]:
        return tuple(BitVector(self.ambient_dim, b) for b in self.basis)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Subspace)
                and self.ambient_dim == other.ambient_dim
                and self.basis == other.basis)

    def __hash__(self):
        return hash((self.ambient_dim, self.basis))

    def __repr__(self):
        return (f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim}, "
                f"pivots={self.pivots})")


def canonical_rep(v: Subspace, x: BitVector) -> BitVector:
    """Canonical representative of the coset x + V (zeros at V's pivots)."""
    if x.dim != v.ambient_dim:
        raise ValueError("dimension mismatch")
    return BitVector(x.dim, v.reduce_bits(x.bits))


def kernel_basis(m: BitMatrix) -> Subspace:
    """The kernel of the linear map as a subspace of the column space."""
    rref = _rref(m.row_bits, m.cols)
    pivots = [p for p, _ in rref]
    pivset = set(pivots)
    vectors = []
    for j in range(m.cols):
        if j in pivset:
            continue
        vec = 1 << j
        for p, b in rref:
            if (b >> j) & 1:
                vec |= 1 << p
        vectors.append(vec)
    return Subspace.span(m.cols, vectors)


def sample_uniform_vector(dim: int, rng: BitStream) -> BitVector:
    return BitVector(dim, rng.bits(dim))


def sample_uniform_matrix(rows: int, cols: int, rng: BitStream) -> BitMatrix:
    """Each of the rows*cols entries is an independent fair bit from rng.

    Rows are drawn in order, each consuming ceil(cols/64) words; the batched
    samplers in the experiments module reproduce this layout exactly.
    """
    return BitMatrix(rows, cols, tuple(rng.bits(cols) for _ in range(rows)))


def sample_surjective_matrix(rows: int, cols: int, rng: BitStream) -> BitMatrix:
    """Uniform over full-row-rank matrices, by rejection on the rank."""
    if cols < rows:
        raise ValueError("need at least as many columns as rows")
    while True:
        m = sample_uniform_matrix(rows, cols, rng)
        if rank(m) == rows:
            return m


def sample_outside(v: Subspace, rng: BitStream) -> BitVector:
    """Uniform over the complement of the subspace, by rejection on membership."""
    if v.dim >= v.ambient_dim:
        raise ValueError("the full space has no outside vectors")
    while True:
        bits = rng.bits(v.ambient_dim)
        if not v.contains_bits(bits):
            assert v.reduce_bits(bits) != 0
            return BitVector(v.ambient_dim, bits)


def write_vector_file(path, v: BitVector) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"dim:{v.dim}\n{v.to_hex()}\n")


def read_vector_file(path) -> BitVector:
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("dim:"):
        raise ValueError("vector file must start with a 'dim:' header")
    dim = int(lines[0][4:])
    if dim == 0:
        return BitVector(0, 0)
    if len(lines) != 2:
        raise ValueError("vector file must have one hex line")
    return BitVector.from_hex(dim, lines[1])
