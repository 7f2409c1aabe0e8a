"""Command-line surface for the bound evaluators and experiment campaigns.

Flags mirror the library's parameter names (--ell, --u, --m, --R, --T, --a,
--r, --lambda, --b, --trials, --seed) so experiment scripts read like the
formulas they exercise.  Output is CSV by default, JSON behind
--format json.  Exit codes: 0 success, 1 invalid input, 2 a falsified
invariant (an empirical confidence bound contradicting an admissible theory
bound, or a failed lemma check).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from . import experiments, potential, theory
from .experiments import (ExperimentSpec, InvariantViolation,
                          mc_fixed_bucket_sweep, mc_fixed_bucket_tail,
                          mc_max_load, mc_surjectivity, result_row,
                          rows_to_csv, rows_to_json,
                          subspace_sharpness_experiment)
from .gf2 import BitVector
from .hashing import build_key_set
from .rng import BitStream

_SEED_ENV = "LINHASH_SEED"


def _default_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(_SEED_ENV)
    if env is not None:
        return int(env)
    return 0


def _emit(args, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="ascii") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit_rows(args, rows) -> None:
    if args.format == "json":
        _emit(args, rows_to_json(rows))
    else:
        _emit(args, rows_to_csv(rows))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help=f"master seed (default: ${_SEED_ENV} or 0)")
    p.add_argument("--threads", type=int, default=os.cpu_count(),
                   help="worker threads for trial chunks (results do not "
                        "depend on this)")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="output format (default csv)")
    p.add_argument("--out", default=None, help="output path (default stdout)")


def _cmd_bound(args) -> int:
    if args.kind == "fixed-bucket":
        if args.r is None:
            raise ValueError("--kind fixed-bucket needs --r")
        value = theory.fixed_bucket_tail_bound(args.r, args.lam)
        payload = {"kind": args.kind, "r": args.r, "lambda": args.lam,
                   "value": value}
    elif args.kind == "dyadic":
        if args.a is None:
            raise ValueError("--kind dyadic needs --a")
        value = theory.dyadic_fixed_bucket_bound(args.a, args.lam)
        payload = {"kind": args.kind, "a": args.a, "lambda": args.lam,
                   "value": value}
    elif args.kind == "maxload":
        if args.ell is None or args.R is None:
            raise ValueError("--kind maxload needs --ell and --R")
        tb = theory.maxload_tail_bound(args.ell, args.R)
        value = tb.value
        payload = {"kind": args.kind, "ell": args.ell, "R": args.R,
                   "value": tb.value, "raw": tb.raw,
                   "admissible": tb.admissible}
    elif args.kind == "general":
        if args.ell is None or args.T is None:
            raise ValueError("--kind general needs --ell and --T")
        tb = theory.general_tail_bound(args.ell, args.lam, args.T)
        value = tb.value
        payload = {"kind": args.kind, "ell": args.ell, "lambda": args.lam,
                   "T": args.T, "value": tb.value, "raw": tb.raw,
                   "admissible": tb.admissible}
    else:  # surjectivity
        if args.ell is None or args.u is None:
            raise ValueError("--kind surjectivity needs --u and --ell")
        exact, bound = theory.surjectivity_failure(args.u, args.ell)
        value = exact
        payload = {"kind": args.kind, "u": args.u, "ell": args.ell,
                   "exact": exact, "bound": bound}
    if args.format == "json":
        _emit(args, json.dumps(payload, indent=2) + "\n")
    else:
        _emit(args, f"{value!r}\n")
    return 0


def _cmd_pmf(args) -> int:
    if args.square is not None:
        msize = args.square
        pairs = [(a, theory.square_nullity_pmf(msize, a))
                 for a in range(msize + 1)]
    else:
        ell, d = args.rect
        pairs = [(a, theory.rect_rank_pmf(ell, d, a))
                 for a in range(max(0, d - ell), d + 1)]
    if args.format == "json":
        _emit(args, json.dumps([{"a": a, "p": p} for a, p in pairs],
                               indent=2) + "\n")
    else:
        _emit(args, "".join(f"a={a}:{p!r}\n" for a, p in pairs))
    return 0


def _cmd_solve_t(args) -> int:
    t = theory.solve_t_scale(args.m, args.ell)
    if args.format == "json":
        _emit(args, json.dumps({"m": args.m, "ell": args.ell, "t": t},
                               indent=2) + "\n")
    else:
        _emit(args, f"{t!r}\n")
    return 0


def _cmd_expectation_bound(args) -> int:
    value = theory.expected_maxload_upper_bound(args.ell)
    ratio = value / (args.ell / math.log2(args.ell))
    if args.format == "json":
        _emit(args, json.dumps({"ell": args.ell, "bound": value,
                                "ratio_to_scale": ratio}, indent=2) + "\n")
    else:
        _emit(args, f"{value!r}\n")
    return 0


def _cmd_mc_fixed_bucket(args) -> int:
    seed = _default_seed(args.seed)
    bucket = None
    if args.bucket is not None:
        bucket = BitVector.from_hex(args.ell, args.bucket)
    spec = ExperimentSpec(
        name="mc-fixed-bucket", u=args.u, ell=args.ell, m=args.m,
        threshold=args.r, trials=args.trials, master_seed=seed,
        key_kind=args.keys, surjective_only=args.surjective, bucket=bucket,
        subspace_dim=args.d, key_path=args.key_file, z=args.z,
        workers=args.threads)
    if args.sweep_buckets:
        estimates = mc_fixed_bucket_sweep(spec, args.sweep_buckets)
        rows = [result_row(f"mc-fixed-bucket[{i}]", args.u, args.ell, args.m,
                           args.r, est) for i, est in enumerate(estimates)]
    else:
        est = mc_fixed_bucket_tail(spec)
        rows = [result_row(spec.name, args.u, args.ell, args.m, args.r, est)]
    _emit_rows(args, rows)
    return 0


def _cmd_mc_max_load(args) -> int:
    seed = _default_seed(args.seed)
    spec = ExperimentSpec(
        name="mc-max-load", u=args.u, ell=args.ell, m=args.m,
        threshold=args.T, trials=args.trials, master_seed=seed,
        key_kind=args.keys, subspace_dim=args.d, key_path=args.key_file,
        z=args.z, workers=args.threads)
    res = mc_max_load(spec)
    rows = [result_row(spec.name, args.u, args.ell, args.m, args.T, res.tail)]
    _emit_rows(args, rows)
    print(f"mean_load={res.mean_load!r} "
          f"mean_ci=[{res.mean_ci[0]!r},{res.mean_ci[1]!r}]", file=sys.stderr)
    return 0


def _cmd_mc_surjectivity(args) -> int:
    seed = _default_seed(args.seed)
    est = mc_surjectivity(args.u, args.ell, args.trials, seed, z=args.z,
                          workers=args.threads)
    rows = [result_row("mc-surjectivity", args.u, args.ell, 0, args.ell, est)]
    _emit_rows(args, rows)
    return 0


def _cmd_sharpness(args) -> int:
    seed = _default_seed(args.seed)
    est = subspace_sharpness_experiment(args.d, args.ell, args.a, args.trials,
                                        seed, z=args.z, workers=args.threads)
    rows = [result_row("sharpness", args.d + 1, args.ell, 1 << args.d,
                       (1 << args.a) - 2, est)]
    _emit_rows(args, rows)
    print(f"lower_bound={est.theory_lower!r} nullity_tail={est.oracle!r}",
          file=sys.stderr)
    return 0


def _cmd_potential_trace(args) -> int:
    seed = _default_seed(args.seed)
    rng_keys = BitStream(seed, experiments.KEYSET_STREAM)
    keys = build_key_set("random_distinct_nonzero", u=args.u, m=args.m,
                         rng=rng_keys)
    if args.b is not None:
        base = args.b
    else:
        base = theory.optimized_base(args.ell, args.R)
    chain = potential.sample_kernel_chain(args.u, args.u - args.ell,
                                          BitStream(seed, 0))
    trace = potential.trace_potentials(keys, chain, base)
    if args.format == "json":
        payload = {"base": base, "k": trace.k,
                   "phi": [trace.phi(i) for i in range(trace.k + 1)],
                   "phi_minus_one": list(trace.phi_minus_one),
                   "log_phi": list(trace.log_phi)}
        _emit(args, json.dumps(payload, indent=2) + "\n")
    else:
        _emit(args, trace.to_csv())
    return 0


def _cmd_verify_lemmas(args) -> int:
    seed = _default_seed(args.seed)
    base = args.b if args.b is not None else 2.0
    growth_ok = heavy_ok = cond_ok = 0
    cond_total = 0
    for i in range(args.trials):
        rng = BitStream(seed, i)
        keys = build_key_set("random_distinct_nonzero", u=args.u,
                             m=1 << args.ell, rng=rng)
        chain = potential.sample_kernel_chain(args.u, args.u - args.ell, rng)
        trace = potential.trace_potentials(keys, chain, base)
        growth_ok += potential.verify_growth(trace)
        heavy_ok += potential.heavy_bin_check(keys, chain, base, args.ell)
        for stage in range(chain.k):
            if args.u - stage > args.max_quotient_log2:
                continue
            mean, phi_sq = potential.conditional_step_expectation(
                keys, chain.stages[stage], base)
            cond_total += 1
            cond_ok += mean <= phi_sq * (1.0 + 1e-12)
    report = (f"growth {growth_ok}/{args.trials} "
              f"heavy-bin {heavy_ok}/{args.trials} "
              f"conditional {cond_ok}/{cond_total}\n")
    _emit(args, report)
    if growth_ok == args.trials and heavy_ok == args.trials \
            and cond_ok == cond_total:
        return 0
    return 2


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(
        prog="linhash",
        description="Binary linear hashing laboratory: closed-form bucket "
                    "tail bounds, rank distributions, potential traces, and "
                    "seeded Monte Carlo campaigns.")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate one closed-form tail bound")
    p.add_argument("--kind", required=True,
                   choices=("fixed-bucket", "dyadic", "maxload", "general",
                            "surjectivity"))
    p.add_argument("--r", type=int, default=None,
                   help="integer load threshold (fixed-bucket form)")
    p.add_argument("--a", type=int, default=None,
                   help="dyadic exponent: threshold 2^a - 2")
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="average load m/n (default 1)")
    p.add_argument("--ell", type=int, default=None,
                   help="log2 of the bucket count")
    p.add_argument("--u", type=int, default=None, help="key dimension")
    p.add_argument("--R", type=float, default=None,
                   help="threshold multiplier against ell/log(ell)")
    p.add_argument("--T", type=float, default=None, help="load threshold")
    _add_common(p)
    p.set_defaults(func=_cmd_bound)

    p = sub.add_parser("pmf", help="nullity distribution of a random binary "
                                   "matrix")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--square", type=int, default=None, metavar="M",
                       help="square M x M matrix")
    group.add_argument("--rect", type=int, nargs=2, default=None,
                       metavar=("ELL", "D"), help="rectangular ELL x D matrix")
    _add_common(p)
    p.set_defaults(func=_cmd_pmf)

    p = sub.add_parser("solve-t", help="solve the implicit max-load scale "
                                       "t ln(t/(e lambda)) = ln n")
    p.add_argument("--m", type=int, required=True, help="key count")
    p.add_argument("--ell", type=int, required=True,
                   help="log2 of the bucket count")
    _add_common(p)
    p.set_defaults(func=_cmd_solve_t)

    p = sub.add_parser("expectation-bound",
                       help="integrated upper bound on the expected maximum "
                            "load of 2^ell keys in 2^ell buckets")
    p.add_argument("--ell", type=int, required=True)
    _add_common(p)
    p.set_defaults(func=_cmd_expectation_bound)

    p = sub.add_parser("mc-fixed-bucket",
                       help="Monte Carlo tail of one prescribed bucket")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--r", type=int, required=True, help="load threshold")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--keys", default="random_distinct_nonzero",
                   choices=("random_distinct_nonzero", "subspace_plus_one",
                            "from_file"))
    p.add_argument("--d", type=int, default=None,
                   help="subspace dimension for subspace_plus_one keys")
    p.add_argument("--key-file", default=None, help="key-set file path")
    p.add_argument("--bucket", default=None,
                   help="bucket label as hex (default: the zero bucket)")
    p.add_argument("--sweep-buckets", type=int, default=0,
                   help="also sweep this many random bucket labels")
    p.add_argument("--surjective", action="store_true",
                   help="condition the sampled maps on full row rank")
    p.add_argument("--z", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=_cmd_mc_fixed_bucket)

    p = sub.add_parser("mc-max-load", help="Monte Carlo maximum-load tail "
                                           "and mean")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--T", type=float, required=True, help="load threshold")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--keys", default="random_distinct_nonzero",
                   choices=("random_distinct_nonzero", "subspace_plus_one",
                            "from_file"))
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--key-file", default=None)
    p.add_argument("--z", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=_cmd_mc_max_load)

    p = sub.add_parser("mc-surjectivity",
                       help="Monte Carlo rank-deficiency probability against "
                            "the exact product")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--z", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=_cmd_mc_surjectivity)

    p = sub.add_parser("sharpness",
                       help="zero-bucket tail of the subspace-plus-one key "
                            "set against its two-sided bounds")
    p.add_argument("--d", type=int, required=True,
                   help="subspace dimension (m = 2^d keys)")
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--a", type=int, required=True,
                   help="threshold exponent: load > 2^a - 2")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--z", type=float, default=3.0)
    _add_common(p)
    p.set_defaults(func=_cmd_sharpness)

    p = sub.add_parser("potential-trace",
                       help="sample one kernel chain and write its potential "
                            "trace")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--b", type=float, default=None,
                   help="potential base (default: tuned base from --R)")
    p.add_argument("--R", type=float, default=2.0,
                   help="multiplier for the tuned base when --b is absent")
    _add_common(p)
    p.set_defaults(func=_cmd_potential_trace)

    p = sub.add_parser("verify-lemmas",
                       help="growth, heavy-bin, and conditional-expectation "
                            "checks on sampled instances (CI gate)")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--b", type=float, default=None,
                   help="potential base (default 2)")
    p.add_argument("--max-quotient-log2", type=int, default=14,
                   help="exhaustive conditional checks only on quotients up "
                        "to 2^this (default 14)")
    _add_common(p)
    p.set_defaults(func=_cmd_verify_lemmas)

    return top


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse already printed the message
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant falsified: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
