"""Closed-form bounds, distributions, and solvers for linear-hash loads.

Conventions used throughout:

* ``ell`` is the log2 of the bucket count, so there are n = 2^ell buckets.
* ``lam`` is the average load m/n for m keys.
* Probability-valued bounds are clamped to [0, 1] at the API boundary; the
  raw formula value is reported alongside, since the formulas are
  informative even where they exceed one.
* Bounds proved only under an admissibility condition report that condition
  as a flag instead of silently assuming it.

All logarithms written ``log`` are base 2, matching the bucket-count
parametrization; ``ln`` is natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

_LN2 = math.log(2.0)
_E = math.e

# Constants of the balanced (m = n) maximum-load tail: the surjective-case
# pair (C0, D0), the doubling of C that removes the surjectivity
# conditioning, and the admissibility constant D.
C0_BALANCED = 48.0 * (_E / _LN2) ** 2
D0_BALANCED = 4.0 * _E / _LN2
C_BALANCED = 2.0 * C0_BALANCED
D_BALANCED = max(D0_BALANCED, math.sqrt(C0_BALANCED))

# Constants of the general (m keys, n bins) tail.  D is raised from the
# surjective-case 4e to the smallest value that keeps the clamped bound at
# most one everywhere on the admissible set (C/D^2 <= 1).
C0_GENERAL = 48.0 * _E * _E
D0_GENERAL = 4.0 * _E
C_GENERAL = 2.0 * C0_GENERAL
D_GENERAL = max(D0_GENERAL, math.sqrt(C_GENERAL))


@dataclass(frozen=True)
class BoundParams:
    """Shared parameter bundle for the load-tail bounds.

    Carries the bucket-space dimension ell (n = 2^ell buckets), the key
    dimension u, the key count m, the average load lam = m / 2^ell (held
    exactly consistent), the threshold multiplier R, the load threshold T,
    and the potential base b.  ``with_tuned_base`` derives b = e * ell^(1/R)
    from R, the choice that trades initial potential against detection of a
    load-R*ell/log(ell) bucket.
    """

    ell: int
    u: int
    m: int
    lam: float
    R: float = 2.0
    T: float = 1.0
    b: float = 2.0
    C0: float = C0_BALANCED
    D0: float = D0_BALANCED

    def __post_init__(self):
        if self.ell < 1 or self.u < 1 or self.m < 1:
            raise ValueError("ell, u, and m must be positive")
        if self.R <= 1:
            raise ValueError("need R > 1")
        if self.T <= 0 or self.b <= 1:
            raise ValueError("need T > 0 and b > 1")
        if self.C0 <= 0 or self.D0 <= 0:
            raise ValueError("constants must be positive")
        if self.lam != self.m / 2.0 ** self.ell:
            raise ValueError("lam must equal m / 2^ell exactly")

    @classmethod
    def with_tuned_base(cls, ell: int, u: int, m: int, R: float,
                        **kwargs) -> "BoundParams":
        lam = m / 2.0 ** ell
        b = optimized_base(ell, R)
        T = R * ell / math.log2(ell)
        return cls(ell=ell, u=u, m=m, lam=lam, R=R, T=T, b=b, **kwargs)

    @property
    def n(self) -> int:
        return 1 << self.ell

    @property
    def growth_exponent(self) -> float:
        """The exponent R/ln(ell): with the tuned base, a bucket of load T
        forces the final potential above 2^(growth_exponent * ell)."""
        return self.R / math.log(self.ell)


def gamma_partial(nfactors: int) -> float:
    """Partial product of (1 - 2^-j) for j = 1..nfactors; decreasing in J."""
    if nfactors < 0:
        raise ValueError("factor count must be nonnegative")
    out = 1.0
    for j in range(1, nfactors + 1):
        out *= 1.0 - 2.0 ** (-j)
    return out


def gamma_constant(tol: float = 1e-15) -> float:
    """The infinite product of (1 - 2^-j), truncated once the remaining
    factor deviates from one by less than tol."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    nfactors = 1
    while 2.0 ** (-nfactors) >= tol:
        nfactors += 1
    return gamma_partial(nfactors)


GAMMA = gamma_constant(1e-15)


def tuple_count_lower_bound(q: int) -> int:
    """Minimum number of ordered linearly independent a-tuples inside any
    set of q distinct nonzero vectors, where a = ceil(log2(q + 1))."""
    if q < 1:
        raise ValueError("set size must be positive")
    a = q.bit_length()  # equals ceil(log2(q + 1)), exactly, for every q >= 1
    out = 1
    for j in range(a):
        factor = q + 1 - (1 << j)
        assert factor > 0
        out *= factor
    return out


def fixed_bucket_tail_bound(r: int, lam: float = 1.0) -> float:
    """Upper bound on Pr[load of one prescribed bucket > r] at average load
    lam, clamped to one; vacuous (= 1) at r = 0.

    Evaluated directly for moderate exponents and in the log domain once
    a*log2(lam) or the product's magnitude passes ~10^3, where the direct
    path would overflow.
    """
    if r < 0:
        raise ValueError("threshold must be nonnegative")
    if lam <= 0:
        raise ValueError("average load must be positive")
    a = (r + 1).bit_length()  # ceil(log2(r + 2)), exactly
    if a * abs(math.log2(lam)) <= 1000.0 and a * math.log2(r + 2) <= 1000.0:
        prod = 1.0
        for j in range(a):
            prod *= r + 2 - (1 << j)
        return min(1.0, lam**a / prod)
    log2_val = a * math.log2(lam) - math.fsum(
        math.log2(r + 2 - (1 << j)) for j in range(a))
    return min(1.0, 2.0 ** log2_val) if log2_val > -1100.0 else 0.0


def dyadic_fixed_bucket_bound(a: int, lam: float = 1.0) -> float:
    """Upper bound on Pr[load of one prescribed bucket > 2^a - 2]:
    lam^a 2^(-a^2) / gamma, clamped to one; log-domain for huge exponents."""
    if a < 1:
        raise ValueError("dyadic exponent must be at least 1")
    if lam <= 0:
        raise ValueError("average load must be positive")
    if a * abs(math.log2(lam)) <= 1000.0 and a * a <= 1000.0:
        return min(1.0, lam**a * 2.0 ** (-a * a) / GAMMA)
    log2_val = a * math.log2(lam) - a * a - math.log2(GAMMA)
    return min(1.0, 2.0 ** log2_val) if log2_val > -1100.0 else 0.0


def square_nullity_pmf(msize: int, a: int) -> float:
    """Probability that a uniform msize x msize binary matrix has nullity
    exactly a."""
    if msize < 1:
        raise ValueError("matrix size must be positive")
    if not 0 <= a <= msize:
        raise ValueError(f"nullity {a} outside [0, {msize}]")
    num = 1.0
    for j in range(a + 1, msize + 1):
        num *= (1.0 - 2.0 ** (-j)) ** 2
    den = 1.0
    for j in range(1, msize - a + 1):
        den *= 1.0 - 2.0 ** (-j)
    return 2.0 ** (-a * a) * num / den


def rect_rank_pmf(ell: int, d: int, a: int) -> float:
    """Probability that a uniform ell x d binary matrix has nullity exactly
    a (rank d - a); valid range is max(0, d - ell) <= a <= d."""
    if ell < 1 or d < 1:
        raise ValueError("shape must be positive")
    if not max(0, d - ell) <= a <= d:
        raise ValueError(f"nullity {a} outside [{max(0, d - ell)}, {d}]")
    r = d - a  # rank
    num = 1.0
    for i in range(r):
        num *= (1.0 - 2.0 ** (i - ell)) * (1.0 - 2.0 ** (i - d))
    den = 1.0
    for i in range(r):
        den *= 1.0 - 2.0 ** (i - r)
    return 2.0 ** (-a * (ell - d + a)) * num / den


def surjectivity_failure(U: int, ell: int) -> tuple[float, float]:
    """(exact, bound): exact probability that a uniform ell x U matrix has
    rank below ell, and the simple 2^(ell-U) upper bound."""
    if ell < 0 or U < ell:
        raise ValueError("need U >= ell >= 0")
    prod = 1.0
    for j in range(ell):
        prod *= 1.0 - 2.0 ** (j - U)
    return 1.0 - prod, 2.0 ** (ell - U)


def optimized_base(ell: int, R: float) -> float:
    """The tuned exponential-potential base e * ell^(1/R), chosen so a bucket
    of load R*ell/log(ell) forces the final potential above 2^((R/ln ell) ell)."""
    if ell < 2:
        raise ValueError("need ell >= 2")
    if R <= 1:
        raise ValueError("need R > 1")
    return _E * ell ** (1.0 / R)


class TailBound(NamedTuple):
    """A clamped bound value, the raw formula value, and admissibility."""

    value: float
    raw: float
    admissible: bool


def maxload_tail_bound(ell: int, R: float, *, C: float | None = None,
                       D: float | None = None) -> TailBound:
    """Tail bound for the maximum load of 2^ell keys in 2^ell buckets at
    threshold R * ell / log(ell).

    The bound C (ln ell)^2 / (R^2 ell^(2 - 2/R)) is proved only when
    R * ell^(1 - 1/R) >= D * ln(ell); outside that set the value is still
    reported (clamped) but flagged inadmissible.
    """
    if ell < 4:
        raise ValueError("need ell >= 4")
    if R <= 1:
        raise ValueError("need R > 1")
    C = C_BALANCED if C is None else C
    D = D_BALANCED if D is None else D
    lnell = math.log(ell)
    raw = C * lnell**2 / (R**2 * ell ** (2.0 - 2.0 / R))
    admissible = R * ell ** (1.0 - 1.0 / R) >= D * lnell
    return TailBound(min(1.0, raw), raw, admissible)


def general_tail_bound(ell: int, lam: float, T: float, *,
                       C: float | None = None,
                       D: float | None = None) -> TailBound:
    """Tail bound for the maximum load of m = lam * 2^ell keys in 2^ell
    buckets at threshold T: C (lam n^(1/T) / T)^2, admissible when
    T >= D * lam * n^(1/T)."""
    if ell < 1:
        raise ValueError("need ell >= 1")
    if lam <= 0:
        raise ValueError("average load must be positive")
    if T <= 0:
        raise ValueError("threshold must be positive")
    C = C_GENERAL if C is None else C
    D = D_GENERAL if D is None else D
    n_pow = 2.0 ** (ell / T)
    raw = C * (lam * n_pow / T) ** 2
    admissible = T >= D * lam * n_pow
    return TailBound(min(1.0, raw), raw, admissible)


def solve_t_scale(m: int, ell: int, *, residual_tol: float = 1e-9) -> float:
    """The fully independent max-load scale t, defined implicitly by
    t * ln(t / (e * lam)) = ln(n) with n = 2^ell and lam = m / n.

    Solved by bisection on the increasing branch t > e * lam; the returned
    value satisfies |t ln(t/(e lam)) - ell ln 2| <= residual_tol.
    """
    if m < 1 or ell < 1:
        raise ValueError("need m >= 1 and ell >= 1")
    lam = m / 2.0**ell
    target = ell * _LN2

    def g(t: float) -> float:
        return t * math.log(t / (_E * lam)) - target

    lo = _E * lam
    hi = _E * lam * 2.0
    tries = 0
    while g(hi) < 0:
        hi *= 2.0
        tries += 1
        if tries > 64:
            raise ValueError("no admissible root bracket found")
    # g(lo+) < 0 since the log factor vanishes; plain bisection
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
        if abs(g(hi)) <= residual_tol:
            return hi
    if abs(g(hi)) <= residual_tol:
        return hi
    raise ValueError("bisection failed to reach the residual tolerance")


def minimal_admissible_R(ell: int, *, D: float | None = None) -> float:
    """Smallest R > 1 with R * ell^(1 - 1/R) >= D * ln(ell); exists for every
    ell >= 2 because the left side increases without bound in R."""
    if ell < 2:
        raise ValueError("need ell >= 2")
    D = D_BALANCED if D is None else D
    target = D * math.log(ell)

    def f(R: float) -> float:
        return R * ell ** (1.0 - 1.0 / R) - target

    lo, hi = 1.0 + 1e-12, 2.0
    while f(hi) < 0:
        hi *= 2.0
        if hi > 1e9:
            raise ValueError("no admissible R below 1e9")
    if f(lo) >= 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi


def expected_maxload_upper_bound(ell: int, *, C: float | None = None,
                                 D: float | None = None) -> float:
    """Numeric upper bound on the expected maximum load of 2^ell keys in
    2^ell buckets, by integrating the clamped tail bound.

    The integration starts at max(R0, R*) where R0 = 1 + (ln ln ell + F)/ln ell
    with F the smallest integer satisfying e^F > 2D, and R* is the smallest
    admissible R at this ell; below the start the trivial bound Pr <= 1 is
    used.  The substitution x = 1 - 1/R turns the tail integral into an
    exact closed form, so no quadrature error enters.
    """
    if ell < 4:
        raise ValueError("need ell >= 4 (smallest admissible scale)")
    C = C_BALANCED if C is None else C
    D = D_BALANCED if D is None else D
    lnell = math.log(ell)
    L = ell / math.log2(ell)

    F = 1
    while math.exp(F) <= 2.0 * D:
        F += 1
    R0 = 1.0 + (math.log(lnell) + F) / lnell
    r_star = minimal_admissible_R(ell, D=D)
    r_start = max(R0, r_star)

    # Largest R at which the (decreasing) raw bound still reaches one.
    def raw(R: float) -> float:
        return C * lnell**2 / (R**2 * ell ** (2.0 - 2.0 / R))

    if raw(r_start) <= 1.0:
        r_clamp_end = r_start
    else:
        lo, hi = r_start, r_start + 1.0
        while raw(hi) > 1.0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if raw(mid) > 1.0:
                lo = mid
            else:
                hi = mid
        r_clamp_end = hi

    # Integral of the raw bound from r_clamp_end to infinity, exactly:
    # with x = 1 - 1/R the integrand becomes C (ln ell)^2 ell^(-2x) dx.
    x_end = 1.0 - 1.0 / r_clamp_end
    tail_integral = C * lnell**2 * (ell ** (-2.0 * x_end) - ell ** (-2.0)) \
        / (2.0 * lnell)
    integral = (r_clamp_end - r_start) + tail_integral
    return L * (r_start + integral)


def one_step_F(u: float) -> float:
    """The capped quadratic min(1, 48 u^2): nondecreasing, Lipschitz with
    constant 8*sqrt(3)."""
    if u < 0:
        raise ValueError("argument must be nonnegative")
    return min(1.0, 48.0 * u * u)


def one_step_inequality_check(s: float, r: float) -> bool:
    """Check F(2r/(2+s)) + 8*sqrt(3) r^2 s/(2+s) <= 48 r^2 at one point of
    the domain s > 0, 0 <= r <= 1/4 (true everywhere; the induction step of
    the quadratic tail bound rests on it)."""
    if s <= 0:
        raise ValueError("s must be positive")
    if not 0 <= r <= 0.25:
        raise ValueError("r must lie in [0, 1/4]")
    lhs = one_step_F(2.0 * r / (2.0 + s)) + 8.0 * math.sqrt(3.0) * r * r * s / (2.0 + s)
    return lhs <= 48.0 * r * r + 1e-15
