import math

import pytest

from linhash.gf2 import BitVector, Subspace, canonical_rep
from linhash.hashing import KeySet, build_key_set
from linhash.potential import (KernelChain, base_optimized_recipe,
                               conditional_step_expectation, coset_loads,
                               heavy_bin_check, potential,
                               quadratic_tail_check, sample_kernel_chain,
                               trace_potentials, verify_growth)
from linhash.rng import BitStream
from linhash.theory import optimized_base


def keyset(u, bit_patterns, allow_zero=False):
    return KeySet(u, tuple(BitVector(u, b) for b in bit_patterns), allow_zero)


def brute_potential(s: KeySet, v: Subspace, b: float) -> float:
    """Oracle: average b^(coset load of x) over every x in the ambient space."""
    u = s.ambient_dim
    key_bits = {k.bits for k in s.keys}
    total = 0.0
    for x in range(1 << u):
        rep = v.reduce_bits(x)
        load = sum(1 for kb in key_bits if v.reduce_bits(kb) == rep)
        total += b ** load
    return total / (1 << u)


# ---------------------------------------------------------------------------
# chains.


def test_chain_sampling_trivial():
    chain = sample_kernel_chain(3, 0, BitStream(1, 0))
    assert chain.k == 0 and chain.stages[0].dim == 0


def test_chain_dims_and_membership():
    s = BitStream(2, 0)
    for _ in range(50):
        chain = sample_kernel_chain(8, 5, s)
        for i, st in enumerate(chain.stages):
            assert st.dim == i
        for i, w in enumerate(chain.adjoined):
            assert not chain.stages[i].contains(w)
            assert chain.stages[i + 1].contains(w)


def test_chain_final_stage_uniform_over_lines():
    # in F2^2 the three 1-dimensional subspaces appear equally often
    s = BitStream(3, 0)
    n = 10**5
    counts = {}
    for _ in range(n):
        chain = sample_kernel_chain(2, 1, s)
        counts[chain.stages[1].basis] = counts.get(chain.stages[1].basis, 0) + 1
    assert len(counts) == 3
    sigma = (n * (1 / 3) * (2 / 3)) ** 0.5
    for c in counts.values():
        assert abs(c - n / 3) <= 3 * sigma


def test_chain_rejects_bad_length():
    with pytest.raises(ValueError):
        sample_kernel_chain(3, 4, BitStream(0, 0))


# ---------------------------------------------------------------------------
# potential values.


def test_potential_zero_stage_identity():
    # with the zero subspace, phi - 1 = m (b - 1) / 2^u exactly
    s = keyset(4, [1, 2, 3, 9, 12])
    for b in (2.0, 1.0 + 1e-9, 7.25):
        phi, pmo = potential(s, Subspace.zero(4), b)
        assert pmo == pytest.approx(len(s.keys) * (b - 1) / 16, rel=1e-12)
        assert phi == pytest.approx(1 + pmo)


def test_potential_hand_enumerated_cases():
    s = keyset(2, [0b00, 0b01], allow_zero=True)  # keys (0,0) and (1,0)
    line_10 = Subspace.span(2, [BitVector.from_coords((1, 0))])
    line_01 = Subspace.span(2, [BitVector.from_coords((0, 1))])
    phi, _ = potential(s, line_10, 2.0)
    assert phi == pytest.approx(2.5)  # cosets {00,10} load 2 and {01,11} load 0
    phi, _ = potential(s, line_01, 2.0)
    assert phi == pytest.approx(2.0)  # both cosets hold one key


def test_potential_matches_brute_force():
    rng = BitStream(11, 0)
    for _ in range(25):
        u = 2 + rng.below(5)
        m = rng.below((1 << u) + 1)
        bits = []
        while len(bits) < m:
            x = rng.bits(u)
            if x not in bits:
                bits.append(x)
        s = KeySet(u, tuple(BitVector(u, x) for x in bits), allow_zero=True)
        v = Subspace.span(u, [BitVector(u, rng.bits(u))
                              for _ in range(rng.below(u + 1))])
        b = 1.5 + rng.below(100) / 40
        phi, pmo = potential(s, v, b)
        want = brute_potential(s, v, b)
        assert phi == pytest.approx(want, rel=1e-11)
        assert 1 + pmo == pytest.approx(want, rel=1e-11)


def test_potential_rejects_flat_base():
    s = keyset(3, [1])
    with pytest.raises(ValueError):
        potential(s, Subspace.zero(3), 1.0)
    with pytest.raises(ValueError):
        potential(s, Subspace.zero(3), 0.5)


# ---------------------------------------------------------------------------
# traces.


def test_trace_hand_enumerated():
    s = keyset(2, [0b00, 0b01], allow_zero=True)
    cases = {
        (0b01,): 2.5,  # adjoin (1,0)
        (0b10,): 2.0,  # adjoin (0,1)
        (0b11,): 2.0,  # adjoin (1,1)
    }
    for adjoined, phi1 in cases.items():
        chain = KernelChain.from_adjoined(2, adjoined)
        tr = trace_potentials(s, chain, 2.0)
        assert tr.phi(0) == pytest.approx(1.5)
        assert tr.phi(1) == pytest.approx(phi1)


def test_trace_matches_stagewise_potential():
    rng = BitStream(12, 0)
    for _ in range(20):
        u = 3 + rng.below(8)
        m = 1 + rng.below((1 << min(u, 6)) - 1)
        s = build_key_set("random_distinct_nonzero", u=u, m=m, rng=rng)
        chain = sample_kernel_chain(u, rng.below(u + 1), rng)
        b = 1.5 + rng.below(100) / 30
        tr = trace_potentials(s, chain, b)
        for i, st in enumerate(chain.stages):
            phi, pmo = potential(s, st, b)
            assert tr.phi_minus_one[i] == pytest.approx(pmo, rel=1e-11)
            assert tr.log_phi[i] == pytest.approx(math.log(phi), rel=1e-11, abs=1e-13)


def test_trace_csv_shape():
    s = keyset(3, [1, 2])
    chain = KernelChain.from_adjoined(3, (0b100,))
    tr = trace_potentials(s, chain, 2.0)
    lines = tr.to_csv().strip().splitlines()
    assert lines[0] == "stage,phi,phi_minus_one,log_phi"
    assert len(lines) == tr.k + 2


def test_merge_identity_explicit_bookkeeping():
    # stage-(i+1) coset load equals the sum of the two merged stage-i loads
    rng = BitStream(13, 0)
    for _ in range(10):
        u = 3 + rng.below(6)
        m = 1 + rng.below((1 << min(u, 5)) - 1)
        s = build_key_set("random_distinct_nonzero", u=u, m=m, rng=rng)
        chain = sample_kernel_chain(u, 2 + rng.below(u - 1), rng)
        for i in range(chain.k):
            vi, vnext = chain.stages[i], chain.stages[i + 1]
            w = chain.adjoined[i]
            load_i = coset_loads(s, vi)
            load_next = coset_loads(s, vnext)
            for x in range(1 << u):
                rep_i = vi.reduce_bits(x)
                rep_merge = vi.reduce_bits(x ^ w.bits)
                rep_next = vnext.reduce_bits(x)
                assert load_next.get(rep_next, 0) == (
                    load_i.get(rep_i, 0) + load_i.get(rep_merge, 0))


# ---------------------------------------------------------------------------
# growth and heavy-bin checks.


def test_verify_growth_hand_cases():
    s = keyset(2, [0b00, 0b01], allow_zero=True)
    for adjoined in ((0b01,), (0b10,), (0b11,)):
        tr = trace_potentials(s, KernelChain.from_adjoined(2, adjoined), 2.0)
        assert verify_growth(tr)


def test_verify_growth_empty_key_set():
    s = KeySet(4, ())
    tr = trace_potentials(s, KernelChain.from_adjoined(4, (1, 2)), 2.0)
    assert all(p == 0.0 for p in tr.phi_minus_one)
    assert verify_growth(tr)


def test_growth_and_heavy_bin_on_random_instances():
    rng = BitStream(14, 0)
    for _ in range(200):
        u = 4 + rng.below(8)
        ell = 1 + rng.below(min(u, 6))
        m = 1 + rng.below(1 << min(u - 1, 7))
        s = build_key_set("random_distinct_nonzero", u=u, m=m, rng=rng)
        chain = sample_kernel_chain(u, u - ell, rng)
        b = 1.2 + rng.below(100) / 25
        assert verify_growth(trace_potentials(s, chain, b))
        assert heavy_bin_check(s, chain, b, ell)


def test_heavy_bin_hand_cases():
    s = keyset(2, [0b00, 0b01], allow_zero=True)
    chain = KernelChain.from_adjoined(2, (0b01,))  # kernel span{(1,0)}: T = 2
    assert heavy_bin_check(s, chain, 2.0, 1)
    chain = KernelChain.from_adjoined(2, (0b10,))  # kernel span{(0,1)}: T = 1
    assert heavy_bin_check(s, chain, 2.0, 1)
    empty = KeySet(2, ())
    assert heavy_bin_check(empty, chain, 2.0, 1)


# ---------------------------------------------------------------------------
# conditional step expectation.


def test_conditional_step_hand_case():
    # over w in {01, 10, 11}: potentials {2, 2.5, 2} average to 13/6 <= 1.5^2
    s = keyset(2, [0b00, 0b01], allow_zero=True)
    mean, phi_sq = conditional_step_expectation(s, Subspace.zero(2), 2.0)
    assert mean == pytest.approx(13 / 6)
    assert phi_sq == pytest.approx(2.25)
    assert mean <= phi_sq


def test_conditional_step_empty_and_single_key():
    empty = KeySet(3, ())
    mean, phi_sq = conditional_step_expectation(empty, Subspace.zero(3), 2.0)
    assert mean == 1.0 == phi_sq
    single = keyset(3, [0b101])
    mean, phi_sq = conditional_step_expectation(single, Subspace.zero(3), 2.0)
    assert mean <= phi_sq + 1e-15


def test_conditional_step_closed_form_cross_check():
    # exhaustive mean equals (N phi(b)^2 - phi(b^2)) / (N - 1)
    rng = BitStream(15, 0)
    for _ in range(20):
        u = 3 + rng.below(6)
        m = 1 + rng.below((1 << min(u, 5)) - 1)
        s = build_key_set("random_distinct_nonzero", u=u, m=m, rng=rng)
        dim = rng.below(u)
        v = Subspace.span(u, [BitVector(u, rng.bits(u)) for _ in range(dim)])
        b = 1.5 + rng.below(40) / 20
        mean, phi_sq = conditional_step_expectation(s, v, b)
        n = 1 << (u - v.dim)
        phi_b = potential(s, v, b)[0]
        phi_b2 = potential(s, v, b * b)[0]
        closed = (n * phi_b**2 - phi_b2) / (n - 1)
        assert mean == pytest.approx(closed, rel=1e-11)
        assert mean <= phi_sq * (1 + 1e-12)


def test_conditional_step_sampled_mode():
    s = keyset(4, [1, 2, 4, 8, 3])
    rng = BitStream(16, 0)
    mean, phi_sq = conditional_step_expectation(s, Subspace.zero(4), 2.0,
                                                mode="sampled", trials=4000,
                                                rng=rng)
    exact, _ = conditional_step_expectation(s, Subspace.zero(4), 2.0)
    assert mean == pytest.approx(exact, rel=0.05)
    assert exact <= phi_sq


def test_conditional_step_rejects_oversized_quotient():
    s = keyset(25, [1])
    with pytest.raises(ValueError):
        conditional_step_expectation(s, Subspace.zero(25), 2.0)


def test_conditional_step_overflow_fallback():
    # all keys in one subspace coset force loads large enough to overflow
    # the direct pow table; the merge fallback must agree with closed form
    u, d = 9, 8
    s = build_key_set("subspace_plus_one", d=d, u=u)
    v = Subspace.span(u, [BitVector(u, 1 << j) for j in range(4)])
    b = 16.0
    mean, phi_sq = conditional_step_expectation(s, v, b)
    n = 1 << (u - v.dim)
    phi_b = potential(s, v, b)[0]
    phi_b2 = potential(s, v, b * b)[0]
    closed = (n * phi_b**2 - phi_b2) / (n - 1)
    assert mean == pytest.approx(closed, rel=1e-9)
    assert mean <= phi_sq * (1 + 1e-12)


# ---------------------------------------------------------------------------
# quadratic tail check.


def test_quadratic_tail_boundary_and_huge_tau():
    s = keyset(4, [1, 2, 3])
    rng = BitStream(17, 0)
    traces = [trace_potentials(s, sample_kernel_chain(4, 2, rng), 2.0)
              for _ in range(50)]
    x0m1 = traces[0].phi_minus_one[0]
    emp, bound = quadratic_tail_check(traces, 1.0 + 4.0 * x0m1)
    assert bound == 1.0  # 48/16 clamps: vacuous at the admissibility line
    emp, bound = quadratic_tail_check(traces, 1e6)
    assert emp == 0.0 and emp <= bound
    with pytest.raises(ValueError):
        quadratic_tail_check(traces, 1.0 + 3.9 * x0m1)


def test_quadratic_tail_campaign_matches_bound():
    # tuned-base replay at U=14, ell=10, tau from the recipe; R = 10 keeps
    # the recipe's tau above the admissibility line with a bound below one
    u, ell, R = 14, 10, 10.0
    k = u - ell
    b, growth_exp, tau = base_optimized_recipe(ell, R, k)
    assert b == pytest.approx(optimized_base(ell, R))
    assert growth_exp == pytest.approx(R / math.log(ell))
    rng_keys = BitStream(18, 1)
    s = build_key_set("random_distinct_nonzero", u=u, m=1 << ell, rng=rng_keys)
    traces = []
    for i in range(10**4):
        chain = sample_kernel_chain(u, k, BitStream(18, 100 + i))
        traces.append(trace_potentials(s, chain, b))
    emp, bound = quadratic_tail_check(traces, tau)
    assert bound < 1.0  # non-vacuous at these parameters
    sigma = math.sqrt(max(bound * (1 - bound), 1e-12) / len(traces))
    assert emp <= bound + 3 * sigma


def test_recipe_values():
    b, A, tau = base_optimized_recipe(16, 2.0, 6)
    assert b == pytest.approx(math.e * 4.0)
    assert A == pytest.approx(2.0 / math.log(16.0))
    assert tau == pytest.approx(1.0 + math.log(2) * A * 16 / 64)


# ---------------------------------------------------------------------------
# numeric edge regimes.


def test_log_domain_potential_matches_exact_rational():
    # loads big enough that b^load overflows the direct path; with an
    # integer base the potential is an exact rational, so math.log of the
    # big-integer numerator/denominator is an independent oracle
    u, d, b = 9, 8, 16
    s = build_key_set("subspace_plus_one", d=d, u=u)
    v = Subspace.span(u, [BitVector(u, bits) for bits in range(1, 1 << d)])
    assert v.dim == d
    chain_rest = [BitVector.unit(u, d)]
    from linhash.potential import KernelChain
    # chain reaching the subspace W after d steps, then one more
    adjoined = [BitVector.unit(u, j) for j in range(d)] + chain_rest
    chain = KernelChain.from_adjoined(u, adjoined)
    tr = trace_potentials(s, chain, float(b))
    # stage d: cosets of W itself; W holds 255 keys, one coset holds the key
    # outside, so phi = (b^255 + b + (2^(u-d) - 2)) / 2^(u-d)
    numer = b**255 + b + (1 << (u - d)) - 2
    want_log = math.log(numer) - (u - d) * math.log(2)
    assert tr.phi_minus_one[d] == math.inf  # beyond float range
    assert tr.log_phi[d] == pytest.approx(want_log, rel=1e-12)
    assert verify_growth(tr)


def test_tiny_centered_potential_survives_large_ambient():
    # at U = 64 the centered part of the initial potential underflows the
    # full potential but must stay exact on its own
    s = keyset(64, [1, 2, 3])
    chain = KernelChain.from_adjoined(64, (1 << 63,))
    tr = trace_potentials(s, chain, 2.0)
    assert tr.phi(0) == 1.0  # the tiny mass vanishes inside 1.0
    assert tr.phi_minus_one[0] == pytest.approx(3 * 1.0 / 2.0**64, rel=1e-12)
    assert verify_growth(tr)
