"""The kernel-chain exponential potential process.

A surjective linear hash map can be sampled by revealing its kernel one
dimension at a time through a chain of subspaces V_0 <= ... <= V_k.  At
stage i the keys are grouped into partial buckets, the cosets of V_i, and
the potential is the average of base^(coset load) over the ambient space.
The potential is computed exactly by grouping keys by coset representative,
never by enumerating the ambient space, so dimensions up to 64 stay cheap.

Three facts about this process are verified on live instances: the
conditional expectation of the next potential never exceeds the square of
the current one, the centered potential at least doubles per stage, and a
bucket of load T forces the final potential above base^T / 2^ell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gf2 import BitVector, Subspace, sample_outside
from .hashing import KeySet
from .rng import BitStream
from .theory import optimized_base

_LN2 = math.log(2.0)
_EXP_LIMIT = 700.0  # beyond this, base**load overflows float64
_MIN_BASE_GAP = 1e-12


@dataclass(frozen=True)
class KernelChain:
    """A flag of subspaces with dims 0..k; stage i+1 adjoins one vector."""

    ambient_dim: int
    stages: tuple[Subspace, ...]
    adjoined: tuple[BitVector, ...]

    def __post_init__(self):
        if not self.stages or self.stages[0].dim != 0:
            raise ValueError("chain must start at the zero subspace")
        if len(self.adjoined) != len(self.stages) - 1:
            raise ValueError("need one adjoined vector per step")
        for i, (v, w) in enumerate(zip(self.stages, self.adjoined)):
            if v.ambient_dim != self.ambient_dim:
                raise ValueError("stage ambient dimension mismatch")
            if v.dim != i:
                raise ValueError("stage dims must be 0, 1, ..., k")
            if v.contains(w):
                raise ValueError("adjoined vector lies inside its stage")
            if self.stages[i + 1] != v.extend(w):
                raise ValueError("stage i+1 must be stage i plus the adjoined vector")
        if self.stages[-1].dim != len(self.adjoined):
            raise ValueError("final stage dimension mismatch")

    @property
    def k(self) -> int:
        return len(self.stages) - 1

    @classmethod
    def from_adjoined(cls, ambient_dim: int, vectors) -> "KernelChain":
        stages = [Subspace.zero(ambient_dim)]
        adjoined = []
        for v in vectors:
            if not isinstance(v, BitVector):
                v = BitVector(ambient_dim, int(v))
            adjoined.append(v)
            stages.append(stages[-1].extend(v))
        return cls(ambient_dim, tuple(stages), tuple(adjoined))


@dataclass(frozen=True)
class PotentialTrace:
    """Potentials along one chain; the centered value is kept separately
    because it underflows inside the full potential once 2^k is large."""

    base: float
    log_phi: tuple[float, ...]
    phi_minus_one: tuple[float, ...]
    k: int

    def __post_init__(self):
        if len(self.log_phi) != self.k + 1 or len(self.phi_minus_one) != self.k + 1:
            raise ValueError("trace arrays must have length k + 1")

    def phi(self, i: int) -> float:
        pmo = self.phi_minus_one[i]
        return 1.0 + pmo if math.isfinite(pmo) else math.inf

    def to_csv(self) -> str:
        out = ["stage,phi,phi_minus_one,log_phi"]
        for i in range(self.k + 1):
            out.append(f"{i},{self.phi(i)!r},{self.phi_minus_one[i]!r},"
                       f"{self.log_phi[i]!r}")
        return "\n".join(out) + "\n"


def sample_kernel_chain(U: int, k: int, rng: BitStream) -> KernelChain:
    """Chain with each adjoined vector uniform outside the current stage;
    the final stage is then a uniform k-dimensional subspace."""
    if not 0 <= k <= U:
        raise ValueError("need 0 <= k <= U")
    stages = [Subspace.zero(U)]
    adjoined = []
    for i in range(k):
        w = sample_outside(stages[-1], rng)
        adjoined.append(w)
        stages.append(stages[-1].extend(w))
        assert stages[-1].dim == i + 1
    return KernelChain(U, tuple(stages), tuple(adjoined))


def coset_loads(s: KeySet, v: Subspace) -> dict[int, int]:
    """Load of every nonempty coset of v, keyed by canonical representative."""
    if v.ambient_dim != s.ambient_dim:
        raise ValueError("dimension mismatch")
    loads: dict[int, int] = {}
    for key in s.keys:
        rep = v.reduce_bits(key.bits)
        loads[rep] = loads.get(rep, 0) + 1
    return loads


def _check_base(b: float) -> float:
    """Validate the base and return ln(b) at full relative precision."""
    if not b > 1.0 + _MIN_BASE_GAP:
        raise ValueError("potential base must exceed 1 + 1e-12")
    return math.log1p(b - 1.0)


def _phi_from_loads(loads, lnb: float, quotient_log2: int) -> tuple[float, float, float]:
    """(phi, phi_minus_one, log_phi) from an iterable of (load, count)."""
    pairs = list(loads)
    max_term = max((f * lnb for f, _ in pairs), default=0.0)
    nonempty = sum(c for _, c in pairs)
    if max_term <= _EXP_LIMIT:
        pmo = math.fsum(c * math.expm1(f * lnb) for f, c in pairs)
        pmo /= 2.0 ** quotient_log2
        return 1.0 + pmo, pmo, math.log1p(pmo)
    # log-domain: fold in the empty cosets at exponent zero
    terms = [(f * lnb, c) for f, c in pairs]
    empty = 2.0 ** quotient_log2 - nonempty
    if empty > 0:
        terms.append((0.0, empty))
    total = math.fsum(c * math.exp(t - max_term) for t, c in terms)
    log_phi = max_term + math.log(total) - quotient_log2 * _LN2
    return math.inf, math.inf, log_phi


def potential(s: KeySet, v: Subspace, b: float) -> tuple[float, float]:
    """Exact potential of the key set over the cosets of v:
    the average of b^(coset load), with the centered part computed without
    cancellation.  Returns (phi, phi_minus_one)."""
    lnb = _check_base(b)
    if v.ambient_dim != s.ambient_dim:
        raise ValueError("dimension mismatch")
    counts: dict[int, int] = {}
    for f in coset_loads(s, v).values():
        counts[f] = counts.get(f, 0) + 1
    phi, pmo, _ = _phi_from_loads(counts.items(), lnb,
                                  s.ambient_dim - v.dim)
    return phi, pmo


def trace_potentials(s: KeySet, chain: KernelChain, b: float) -> PotentialTrace:
    """Potential at every stage of the chain.

    Uses an incremental coset-label pipeline: reducing a stage-i
    representative by the single new basis row yields the stage-(i+1)
    representative, so the whole trace costs O(k * |S|).
    """
    lnb = _check_base(b)
    if chain.ambient_dim != s.ambient_dim:
        raise ValueError("dimension mismatch")
    U = s.ambient_dim
    use_numpy = U <= 64 and len(s.keys) > 0

    log_phis = []
    pmos = []
    if use_numpy:
        labels = np.array([k.bits for k in s.keys], dtype=np.uint64)
    else:
        labels_py = [k.bits for k in s.keys]

    for i in range(chain.k + 1):
        if use_numpy:
            loads = np.unique(labels, return_counts=True)[1]
            vals, mult = np.unique(loads, return_counts=True)
            grouped = list(zip(vals.tolist(), mult.tolist()))
        else:
            agg: dict[int, int] = {}
            for lab in labels_py:
                agg[lab] = agg.get(lab, 0) + 1
            grouped_d: dict[int, int] = {}
            for f in agg.values():
                grouped_d[f] = grouped_d.get(f, 0) + 1
            grouped = list(grouped_d.items())
        _, pmo, log_phi = _phi_from_loads(grouped, lnb, U - i)
        pmos.append(pmo)
        log_phis.append(log_phi)
        if i < chain.k:
            new_row = chain.stages[i].reduce_bits(chain.adjoined[i].bits)
            pivot = (new_row & -new_row).bit_length() - 1
            if use_numpy:
                take = (labels >> np.uint64(pivot)) & np.uint64(1)
                labels = labels ^ (take * np.uint64(new_row))
            else:
                labels_py = [lab ^ new_row if (lab >> pivot) & 1 else lab
                             for lab in labels_py]
    return PotentialTrace(b, tuple(log_phis), tuple(pmos), chain.k)


def verify_growth(trace: PotentialTrace, rel_slack: float = 1e-9) -> bool:
    """True when the centered potential at least doubles at every stage,
    up to the given relative slack."""
    for i in range(trace.k):
        cur, nxt = trace.phi_minus_one[i], trace.phi_minus_one[i + 1]
        if math.isinf(nxt):
            if math.isinf(cur):
                # both beyond float range: compare logarithms, where the
                # centered value and the potential itself agree
                if trace.log_phi[i + 1] < trace.log_phi[i] + _LN2 - rel_slack:
                    return False
            continue
        if nxt < 2.0 * cur * (1.0 - rel_slack):
            return False
    return True


def heavy_bin_check(s: KeySet, chain: KernelChain, b: float, ell: int,
                    rel_slack: float = 1e-9) -> bool:
    """True when the final potential dominates b^T / 2^ell for T the largest
    final coset load (guaranteed; compared in the log domain)."""
    lnb = _check_base(b)
    if chain.k != s.ambient_dim - ell:
        raise ValueError("chain length must equal ambient_dim - ell")
    loads = coset_loads(s, chain.stages[-1])
    T = max(loads.values(), default=0)
    trace = trace_potentials(s, chain, b)
    lhs = trace.log_phi[chain.k]
    rhs = T * lnb - ell * _LN2 + math.log1p(-rel_slack)
    return lhs >= rhs


def _free_compress(v: Subspace, bits: int) -> int:
    out = 0
    for i, col in enumerate(v.free_columns()):
        out |= ((bits >> col) & 1) << i
    return out


def _merged_phi_minus_one(f_by_label: dict[int, int], w_free: int,
                          lnb: float, quotient_log2: int) -> tuple[float, float]:
    """(phi, phi_minus_one) after merging coset pairs {L, L xor w}."""
    merged: dict[int, int] = {}
    for lab, f in f_by_label.items():
        key = min(lab, lab ^ w_free)
        merged[key] = merged.get(key, 0) + f
    counts: dict[int, int] = {}
    for f in merged.values():
        counts[f] = counts.get(f, 0) + 1
    phi, pmo, _ = _phi_from_loads(counts.items(), lnb, quotient_log2 - 1)
    return phi, pmo


def conditional_step_expectation(s: KeySet, v: Subspace, b: float,
                                 mode: str = "exhaustive",
                                 trials: int = 0,
                                 rng: BitStream | None = None
                                 ) -> tuple[float, float]:
    """Mean of the next-stage potential over the choice of adjoined vector,
    together with the square of the current potential.

    In exhaustive mode every vector outside v is enumerated (through its
    quotient coset; requires a quotient of size at most 2^20), giving the
    exact conditional expectation.  In sampled mode the mean is a Monte
    Carlo average over ``trials`` draws.
    """
    lnb = _check_base(b)
    if v.ambient_dim != s.ambient_dim:
        raise ValueError("dimension mismatch")
    if v.dim >= v.ambient_dim:
        raise ValueError("the full space admits no further step")
    D = v.ambient_dim - v.dim
    phi, _ = potential(s, v, b)
    phi_sq = phi * phi

    f_by_label = {_free_compress(v, lab): f
                  for lab, f in coset_loads(s, v).items()}

    if mode == "sampled":
        if trials < 1 or rng is None:
            raise ValueError("sampled mode needs trials >= 1 and an rng")
        acc = 0.0
        for _ in range(trials):
            w = sample_outside(v, rng)
            w_free = _free_compress(v, v.reduce_bits(w.bits))
            acc += _merged_phi_minus_one(f_by_label, w_free, lnb, D)[0]
        return acc / trials, phi_sq
    if mode != "exhaustive":
        raise ValueError(f"unknown mode {mode!r}")
    if D > 20:
        raise ValueError("exhaustive mode needs a quotient of at most 2^20")

    n_cosets = 1 << D
    if not f_by_label:
        return 1.0, phi_sq  # empty key set: every next potential is exactly 1

    labels = np.array(sorted(f_by_label), dtype=np.int64)
    loads = np.array([f_by_label[int(l)] for l in labels], dtype=np.int64)
    max_pair_exponent = 2.0 * float(loads.max()) * lnb
    if max_pair_exponent > _EXP_LIMIT:
        # rare overflow regime: fall back to the direct per-coset merge
        acc = 0.0
        for w_free in range(1, n_cosets):
            acc += _merged_phi_minus_one(f_by_label, w_free, lnb, D)[0]
        return acc / (n_cosets - 1), phi_sq

    bf = np.exp(loads * lnb)
    sum_bf = float(bf.sum())
    pair_products = np.zeros(n_cosets)
    partner_mass = np.zeros(n_cosets)
    ordered_hits = np.zeros(n_cosets, dtype=np.int64)
    chunk = max(1, (1 << 22) // max(1, labels.size))
    for lo in range(0, labels.size, chunk):
        hi = min(labels.size, lo + chunk)
        idx = labels[lo:hi, None] ^ labels[None, :]
        np.add.at(pair_products, idx, bf[lo:hi, None] * bf[None, :])
        np.add.at(partner_mass, idx, np.broadcast_to(bf[lo:hi, None], idx.shape))
        np.add.at(ordered_hits, idx, 1)

    nhalf = n_cosets >> 1
    pair_sums = 0.5 * pair_products[1:] + (sum_bf - partner_mass[1:])
    supported = labels.size - 0.5 * ordered_hits[1:]
    phi_next = (pair_sums + (nhalf - supported)) / nhalf
    mean = float(phi_next.sum()) / (n_cosets - 1)
    return mean, phi_sq


def quadratic_tail_check(traces, tau: float) -> tuple[float, float]:
    """Fraction of traces whose final potential reaches tau^(2^k), against
    the quadratic tail bound 48 ((phi_0 - 1)/(tau - 1))^2 clamped to one.

    All traces must share the initial potential and the chain length, and
    tau must clear the admissibility line 1 + 4 (phi_0 - 1).
    """
    traces = list(traces)
    if not traces:
        raise ValueError("need at least one trace")
    k = traces[0].k
    x0_minus_one = traces[0].phi_minus_one[0]
    for t in traces:
        if t.k != k:
            raise ValueError("traces must share the chain length")
        if abs(t.phi_minus_one[0] - x0_minus_one) > 1e-12 * max(1.0, x0_minus_one):
            raise ValueError("traces must share the initial potential")
    if tau <= 1.0:
        raise ValueError("tau must exceed 1")
    if tau < 1.0 + 4.0 * x0_minus_one - 1e-15:
        raise ValueError("tau is below the admissibility line 1 + 4(phi0 - 1)")
    threshold = (2.0 ** k) * math.log(tau)
    hits = sum(1 for t in traces if t.log_phi[k] >= threshold)
    empirical = hits / len(traces)
    bound = min(1.0, 48.0 * (x0_minus_one / (tau - 1.0)) ** 2)
    return empirical, bound


def base_optimized_recipe(ell: int, R: float, k: int) -> tuple[float, float, float]:
    """(base, growth exponent, tau) for replaying the tuned-base tail
    argument at parameters (ell, R, k): base e*ell^(1/R), exponent R/ln(ell),
    and tau = 1 + ln(2) * exponent * ell / 2^k."""
    if k < 0:
        raise ValueError("chain length must be nonnegative")
    b = optimized_base(ell, R)
    A = R / math.log(ell)
    tau = 1.0 + _LN2 * A * ell / (2.0 ** k)
    return b, A, tau
