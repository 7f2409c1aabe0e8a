"""Seeded Monte Carlo campaigns confronting empirical tails with the bounds.

Every campaign assigns trial i its own random stream keyed by
(master_seed, i), and aggregates nothing but integer counters, so results
are byte-identical for a given master seed no matter how trials are chunked
or how many worker threads run them.  The per-trial work (matrix sampling,
rank, bucket counting) happens in the kernel backend on whole chunks.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, theory
from .gf2 import BitVector
from .hashing import KeySet, build_key_set
from .rng import BitStream, stream_seeds, stream_words

# Stream-id layout: trial i uses stream i; campaign-level draws (the key
# set, swept bucket labels) use reserved high ids so they never collide.
KEYSET_STREAM = 1 << 62
BUCKET_STREAM = (1 << 62) + 1

_CHUNK = 4096


class InvariantViolation(RuntimeError):
    """An empirical confidence bound contradicted an admissible theory
    bound; either the implementation or the bound is wrong."""


def wilson_interval(successes: int, trials: int, z: float) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; contains the point
    estimate successes/trials."""
    if trials < 1:
        raise ValueError("need at least one trial")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    if z <= 0:
        raise ValueError("z must be positive")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2.0 * trials)) / denom
    margin = z * math.sqrt(phat * (1.0 - phat) / trials
                           + z2 / (4.0 * trials * trials)) / denom
    low = max(0.0, min(center - margin, phat))
    high = min(1.0, max(center + margin, phat))
    return low, high


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of a tail probability with its provenance."""

    successes: int
    trials: int
    z: float
    seed: int
    theory_bound: float | None = None
    admissible: bool | None = None
    theory_lower: float | None = None
    oracle: float | None = None
    p_hat: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        low, high = wilson_interval(self.successes, self.trials, self.z)
        object.__setattr__(self, "p_hat", self.successes / self.trials)
        object.__setattr__(self, "ci_low", low)
        object.__setattr__(self, "ci_high", high)


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of one campaign; the master seed pins every random draw."""

    name: str
    u: int
    ell: int
    m: int
    threshold: float | int
    trials: int
    master_seed: int
    key_kind: str = "random_distinct_nonzero"
    surjective_only: bool = False
    bucket: BitVector | None = None
    subspace_dim: int | None = None
    key_path: str | None = None
    z: float = 3.0
    workers: int | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("need at least one trial")
        if self.m < 1:
            raise ValueError("need at least one key")
        if self.u < 1:
            raise ValueError("need ambient dimension at least 1")
        if self.ell < 0:
            raise ValueError("bucket dimension must be nonnegative")
        if self.surjective_only and self.u < self.ell:
            raise ValueError("surjective maps need u >= ell")
        if self.bucket is not None and self.bucket.dim != self.ell:
            raise ValueError("bucket label dimension must equal ell")


def _resolve_keys(spec: ExperimentSpec) -> KeySet:
    if spec.key_kind == "random_distinct_nonzero":
        rng = BitStream(spec.master_seed, KEYSET_STREAM)
        keys = build_key_set("random_distinct_nonzero", u=spec.u, m=spec.m,
                             rng=rng)
    elif spec.key_kind == "subspace_plus_one":
        keys = build_key_set("subspace_plus_one", d=spec.subspace_dim,
                             m=spec.m, u=spec.u)
    elif spec.key_kind == "from_file":
        keys = build_key_set("from_file", path=spec.key_path)
        if keys.ambient_dim != spec.u or len(keys) != spec.m:
            raise ValueError("key file does not match the declared u and m")
    else:
        raise ValueError(f"unknown key kind {spec.key_kind!r}")
    if keys.allow_zero:
        raise ValueError("campaigns require nonzero keys")
    return keys


def _draw_matrices(seeds: np.ndarray, counters: np.ndarray, nrows: int,
                   nwords: int, ncols: int) -> tuple[np.ndarray, np.ndarray]:
    ntrials = seeds.shape[0]
    words = stream_words(seeds, counters, nrows * nwords)
    mats = words.reshape(ntrials, nrows, nwords).copy()
    rem = ncols & 63
    if rem and nrows:
        mats[:, :, nwords - 1] &= np.uint64((1 << rem) - 1)
    return mats, counters + np.uint64(nrows * nwords)


def _sample_matrix_chunk(master_seed: int, lo: int, hi: int, nrows: int,
                         ncols: int, surjective: bool) -> np.ndarray:
    """Matrices for trials [lo, hi), reproducing the scalar sampler exactly:
    trial i draws from stream i, row-major, with surjective rejection
    consuming further words of the same stream."""
    nwords = max(1, (ncols + 63) // 64)
    ids = np.arange(lo, hi, dtype=np.uint64)
    seeds = stream_seeds(master_seed, ids)
    counters = np.zeros(hi - lo, dtype=np.uint64)
    mats, counters = _draw_matrices(seeds, counters, nrows, nwords, ncols)
    if surjective and nrows > 0:
        while True:
            ranks = _kernels.rank_batch(mats, ncols)
            bad = np.nonzero(ranks < nrows)[0]
            if bad.size == 0:
                break
            redraw, new_ctr = _draw_matrices(seeds[bad], counters[bad],
                                             nrows, nwords, ncols)
            mats[bad] = redraw
            counters[bad] = new_ctr
    return mats


def _run_chunks(trials: int, workers: int | None, job) -> list[int]:
    """Sum job(lo, hi) tuples over fixed-size chunks; chunk boundaries do
    not depend on the worker count, and addition commutes, so the result is
    identical for any scheduling."""
    spans = [(lo, min(trials, lo + _CHUNK)) for lo in range(0, trials, _CHUNK)]
    if workers is not None and workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda s: job(*s), spans))
    else:
        parts = [job(*s) for s in spans]
    return [int(sum(col)) for col in zip(*parts)]


def _warn_if_uninformative(bound: float | None, trials: int) -> None:
    if bound is not None and bound < 10.0 / trials:
        warnings.warn(
            f"theory bound {bound:.3g} is below 10/trials; the Monte Carlo "
            "estimate is uninformative at this trial count", RuntimeWarning)


def _check_loud(est: TailEstimate, what: str) -> None:
    if (est.theory_bound is not None and est.admissible
            and est.ci_low > est.theory_bound):
        raise InvariantViolation(
            f"{what}: empirical lower confidence bound {est.ci_low:.6g} "
            f"exceeds the theory bound {est.theory_bound:.6g}")
    if (est.theory_lower is not None
            and est.ci_high < est.theory_lower):
        raise InvariantViolation(
            f"{what}: empirical upper confidence bound {est.ci_high:.6g} "
            f"falls below the theory lower bound {est.theory_lower:.6g}")


def mc_fixed_bucket_tail(spec: ExperimentSpec) -> TailEstimate:
    """Estimate Pr[load of one prescribed bucket > r] over random maps."""
    r = int(spec.threshold)
    if r < 0:
        raise ValueError("threshold must be a nonnegative integer")
    keys = _resolve_keys(spec)
    key_words = keys.key_words
    y = spec.bucket if spec.bucket is not None else BitVector.zeros(spec.ell)
    lam = spec.m / 2.0 ** spec.ell
    bound = theory.fixed_bucket_tail_bound(r, lam)

    def job(lo: int, hi: int) -> tuple[int]:
        mats = _sample_matrix_chunk(spec.master_seed, lo, hi, spec.ell,
                                    spec.u, spec.surjective_only)
        counts = _kernels.fixed_bucket_counts(mats, key_words, y.bits)
        return (int((counts > r).sum()),)

    (successes,) = _run_chunks(spec.trials, spec.workers, job)
    est = TailEstimate(successes, spec.trials, spec.z, spec.master_seed,
                       theory_bound=bound, admissible=True)
    _warn_if_uninformative(bound, spec.trials)
    _check_loud(est, spec.name)
    return est


def mc_fixed_bucket_sweep(spec: ExperimentSpec, nbuckets: int = 8) -> list[TailEstimate]:
    """Rerun the fixed-bucket campaign on a random sample of bucket labels;
    the tail bound holds for every label, so all runs must respect it."""
    rng = BitStream(spec.master_seed, BUCKET_STREAM)
    out = []
    for _ in range(nbuckets):
        y = BitVector(spec.ell, rng.bits(spec.ell))
        swept = ExperimentSpec(
            name=f"{spec.name}[y={y.to_hex()}]", u=spec.u, ell=spec.ell,
            m=spec.m, threshold=spec.threshold, trials=spec.trials,
            master_seed=spec.master_seed, key_kind=spec.key_kind,
            surjective_only=spec.surjective_only, bucket=y,
            subspace_dim=spec.subspace_dim, key_path=spec.key_path,
            z=spec.z, workers=spec.workers)
        out.append(mc_fixed_bucket_tail(swept))
    return out


def subspace_sharpness_experiment(d: int, ell: int, a: int, trials: int,
                                  seed: int, z: float = 3.0,
                                  workers: int | None = None) -> TailEstimate:
    """Zero-bucket tail of the subspace-plus-one key set.

    For a >= 2 the event {zero-bucket load > 2^a - 2} coincides exactly with
    {nullity of the map restricted to the subspace >= a}, so the estimate is
    pinned between gamma^2 lam^a 2^(-a^2) and gamma^-1 lam^a 2^(-a^2) and
    must match the exact nullity tail; for a = 1 the extra vector makes the
    nullity tail a lower-bound reference instead.
    """
    if d < 1 or ell < 1:
        raise ValueError("need d >= 1 and ell >= 1")
    if a < max(1, d - ell):
        raise ValueError("threshold exponent below max(1, d - ell)")
    lam = 2.0 ** (d - ell)
    upper = theory.dyadic_fixed_bucket_bound(a, lam)
    lower = theory.GAMMA ** 2 * lam ** a * 2.0 ** (-a * a)
    lo_a = max(a, max(0, d - ell))
    nullity_tail = sum(theory.rect_rank_pmf(ell, d, ap)
                       for ap in range(lo_a, d + 1)) if a <= d else 0.0
    spec = ExperimentSpec(
        name=f"sharpness(d={d},ell={ell},a={a})", u=d + 1, ell=ell, m=1 << d,
        threshold=(1 << a) - 2, trials=trials, master_seed=seed,
        key_kind="subspace_plus_one", subspace_dim=d, z=z, workers=workers)
    base = mc_fixed_bucket_tail(spec)
    est = TailEstimate(base.successes, base.trials, base.z, base.seed,
                       theory_bound=upper, admissible=True,
                       theory_lower=lower if a <= d else None,
                       oracle=nullity_tail)
    _check_loud(est, spec.name)
    return est


@dataclass(frozen=True)
class MaxLoadResult:
    tail: TailEstimate
    mean_load: float
    mean_ci: tuple[float, float]


def mc_max_load(spec: ExperimentSpec) -> MaxLoadResult:
    """Estimate Pr[maximum load >= T] and the mean maximum load."""
    T = float(spec.threshold)
    if T <= 0:
        raise ValueError("threshold must be positive")
    keys = _resolve_keys(spec)
    key_words = keys.key_words
    lam = spec.m / 2.0 ** spec.ell
    scale = spec.ell / math.log2(spec.ell) if spec.ell >= 2 else None
    if spec.m == 1 << spec.ell and spec.ell >= 4 and scale and T / scale > 1.0:
        tb = theory.maxload_tail_bound(spec.ell, T / scale)
    else:
        tb = theory.general_tail_bound(spec.ell, lam, T)

    def job(lo: int, hi: int) -> tuple[int, int, int]:
        mats = _sample_matrix_chunk(spec.master_seed, lo, hi, spec.ell,
                                    spec.u, spec.surjective_only)
        ml = _kernels.max_loads(mats, key_words, spec.ell)
        return (int((ml >= T).sum()), int(ml.sum()), int((ml * ml).sum()))

    successes, load_sum, load_sqsum = _run_chunks(spec.trials, spec.workers, job)
    est = TailEstimate(successes, spec.trials, spec.z, spec.master_seed,
                       theory_bound=tb.value, admissible=tb.admissible)
    _warn_if_uninformative(tb.value if tb.admissible else None, spec.trials)
    _check_loud(est, spec.name)
    mean = load_sum / spec.trials
    var = max(0.0, load_sqsum / spec.trials - mean * mean)
    half = spec.z * math.sqrt(var / spec.trials)
    return MaxLoadResult(est, mean, (mean - half, mean + half))


def mc_surjectivity(U: int, ell: int, trials: int, seed: int, z: float = 3.0,
                    workers: int | None = None) -> TailEstimate:
    """Estimate the probability that a uniform ell x U map is not surjective;
    the exact product value rides along as the theory bound."""
    if U < ell or ell < 0:
        raise ValueError("need U >= ell >= 0")
    exact, _simple = theory.surjectivity_failure(U, ell)

    def job(lo: int, hi: int) -> tuple[int]:
        mats = _sample_matrix_chunk(seed, lo, hi, ell, U, surjective=False)
        ranks = _kernels.rank_batch(mats, U)
        return (int((ranks < ell).sum()),)

    (successes,) = _run_chunks(trials, workers, job)
    est = TailEstimate(successes, trials, z, seed,
                       theory_bound=exact, admissible=True)
    _check_loud(est, f"surjectivity(U={U},ell={ell})")
    return est


def count_independent_tuples(vectors, a: int) -> int:
    """Brute force: number of ordered linearly independent a-tuples drawn
    from the given distinct nonzero vectors (full a-fold loop with
    incremental span membership)."""
    bits = [v.bits if isinstance(v, BitVector) else int(v) for v in vectors]
    if len(set(bits)) != len(bits) or 0 in bits:
        raise ValueError("vectors must be distinct and nonzero")
    if a < 0:
        raise ValueError("tuple length must be nonnegative")
    if len(bits) ** a > 10**7:
        raise ValueError("tuple enumeration too large for brute force")

    def reduce(x: int, basis) -> int:
        for p, b in basis:
            if (x >> p) & 1:
                x ^= b
        return x

    count = 0
    stack = [(0, [])]
    while stack:
        depth, basis = stack.pop()
        if depth == a:
            count += 1
            continue
        for x in bits:
            cur = reduce(x, basis)
            if cur:
                piv = (cur & -cur).bit_length() - 1
                stack.append((depth + 1, basis + [(piv, cur)]))
    return count


def mc_independent_tuples(a: int, sets) -> bool:
    """Check, on every given key set, that the brute-force count of ordered
    independent a-tuples reaches the product lower bound."""
    for keyset in sets:
        vectors = keyset.keys if isinstance(keyset, KeySet) else tuple(keyset)
        q = len(vectors)
        if q < 1:
            raise ValueError("sets must be nonempty")
        expected_a = q.bit_length()  # ceil(log2(q + 1))
        if a != expected_a:
            raise ValueError(f"set of size {q} requires tuple length "
                             f"{expected_a}, got {a}")
        if count_independent_tuples(vectors, a) < theory.tuple_count_lower_bound(q):
            return False
    return True


# ---------------------------------------------------------------------------
# Result serialization: one CSV/JSON row schema for every campaign.

RESULT_FIELDS = ("name", "u", "ell", "m", "threshold", "trials", "successes",
                 "p_hat", "ci_low", "ci_high", "theory_bound", "admissible",
                 "seed")


def result_row(name: str, u: int, ell: int, m: int, threshold,
               est: TailEstimate) -> dict:
    return {
        "name": name, "u": u, "ell": ell, "m": m, "threshold": threshold,
        "trials": est.trials, "successes": est.successes,
        "p_hat": est.p_hat, "ci_low": est.ci_low, "ci_high": est.ci_high,
        "theory_bound": est.theory_bound,
        "admissible": est.admissible, "seed": est.seed,
    }


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def rows_to_csv(rows) -> str:
    lines = [",".join(RESULT_FIELDS)]
    for row in rows:
        lines.append(",".join(_cell(row[f]) for f in RESULT_FIELDS))
    return "\n".join(lines) + "\n"


def rows_to_json(rows) -> str:
    return json.dumps([{f: row[f] for f in RESULT_FIELDS} for row in rows],
                      indent=2) + "\n"
