import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uniqc.classical import (
    Distribution,
    ck_decode,
    ck_encode,
    ck_mass,
    ck_set,
    compositions,
    rank_in_type,
    shannon_entropy,
    simulate_codec,
    type_of,
    typical_set,
    unrank_in_type,
)
from uniqc.errors import CodewordOutOfRange, LengthMismatch, SymbolOutOfRange


def brute_typical(p, n, delta):
    h = -sum(q * math.log2(q) for q in p if q > 0)
    out = []
    for x in itertools.product(range(len(p)), repeat=n):
        px = math.prod(p[s] for s in x)
        if px > 0 and abs(-math.log2(px) / n - h) <= delta + 1e-12:
            out.append((x, px))
    return out


def empirical_entropy(x, d):
    n = len(x)
    return -sum(c / n * math.log2(c / n) for c in np.bincount(x, minlength=d) if c)


def test_entropy_values():
    assert shannon_entropy([0.5, 0.5]) == pytest.approx(1.0)
    assert shannon_entropy([1.0, 0.0]) == 0.0
    assert shannon_entropy([0.25] * 4) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        Distribution([0.5, 0.6])
    with pytest.raises(ValueError):
        Distribution([1.2, -0.2])


def test_type_of_and_errors():
    assert type_of((0, 1, 1, 2), 3).counts == (1, 2, 1)
    with pytest.raises(SymbolOutOfRange):
        type_of((0, 3), 3)
    with pytest.raises(ValueError):
        type_of((), 2)


def test_compositions_count_and_colex_order():
    comps = compositions(4, 3)
    assert len(comps) == math.comb(6, 2)
    assert comps == sorted(comps, key=lambda c: c[::-1])
    assert all(sum(c) == 4 for c in comps)


@pytest.mark.parametrize("p,n,delta", [([0.9, 0.1], 10, 0.2), ([0.5, 0.3, 0.2], 6, 0.1), ([0.7, 0.3], 8, 0.05)])
def test_typical_set_matches_brute_force(p, n, delta):
    ts = typical_set(p, n, delta)
    brute = brute_typical(p, n, delta)
    assert set(ts.members) == {x for x, _ in brute}
    assert ts.size == len(brute)
    assert ts.mass == pytest.approx(math.fsum(px for _, px in brute), abs=1e-12)
    h = shannon_entropy(p)
    assert ts.size <= 2 ** (n * (h + delta))
    assert all(ts.contains(x) for x in ts.members[:50])


def test_typical_set_reference_values():
    ts = typical_set([0.9, 0.1], 10, 0.2)
    assert ts.size == 10
    assert ts.mass == pytest.approx(0.387420489, abs=1e-9)


def test_ck_zero_entropy_example():
    ck = ck_set(2, 4, 0.0, 0.1)
    assert [t.counts for t in ck.member_types] == [(4, 0), (0, 4)]
    assert ck_encode(ck, (0, 0, 0, 0)) == (0, False)
    assert ck_encode(ck, (1, 1, 1, 1)) == (1, False)
    assert ck_encode(ck, (0, 1, 0, 1)).atypical
    assert (0, 1, 0, 1) not in ck and (1, 1, 1, 1) in ck


@pytest.mark.parametrize("d,n,S,delta", [(2, 8, 0.5, 0.1), (3, 5, 1.0, 0.2), (2, 10, 0.8, 0.1), (4, 4, 1.5, 0.3)])
def test_ck_membership_matches_brute_force(d, n, S, delta):
    ck = ck_set(d, n, S, delta)
    brute = [x for x in itertools.product(range(d), repeat=n) if empirical_entropy(x, d) <= S + delta / 2 + 1e-12]
    assert ck.total_size == len(brute)
    assert set(ck.sequences()) == set(brute)
    assert ck.total_size <= ck.size_bound
    assert all(t.entropy <= ck.entropy_budget + 1e-12 for t in ck.member_types)


@pytest.mark.parametrize("d,n,S", [(2, 6, 0.5), (3, 4, 1.2), (2, 9, 1.0)])
def test_codec_is_a_bijection_onto_codewords(d, n, S):
    ck = ck_set(d, n, S, 0.1)
    seqs = list(ck.sequences())
    codes = [ck_encode(ck, x).codeword for x in seqs]
    assert codes == list(range(ck.total_size))
    assert all(ck_decode(ck, k) == x for k, x in enumerate(seqs))


def test_codec_errors():
    ck = ck_set(2, 4, 0.5, 0.1)
    with pytest.raises(LengthMismatch):
        ck_encode(ck, (0, 0))
    with pytest.raises(CodewordOutOfRange):
        ck_decode(ck, ck.total_size)
    with pytest.raises(CodewordOutOfRange):
        ck_decode(ck, -1)
    with pytest.raises(ValueError):
        ck_set(2, 4, 1.5, 0.1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=1, max_size=9))
def test_rank_unrank_roundtrip(x):
    x = tuple(x)
    counts = type_of(x, 3).counts
    r = rank_in_type(x, 3)
    assert 0 <= r < math.prod(range(1, len(x) + 1)) // math.prod(math.factorial(c) for c in counts)
    assert unrank_in_type(counts, r) == x


def test_rank_is_lexicographic():
    counts = (2, 1, 1)
    perms = sorted(set(itertools.permutations((0, 0, 1, 2))))
    assert [rank_in_type(p, 3) for p in perms] == list(range(len(perms)))


def test_ck_mass_matches_brute_force():
    p = [0.8, 0.15, 0.05]
    ck = ck_set(3, 6, 1.0, 0.2)
    brute = math.fsum(math.prod(p[s] for s in x) for x in ck.sequences())
    assert ck_mass(ck, p) == pytest.approx(brute, abs=1e-12)


def test_ck_mass_grows_for_low_entropy_source():
    p = [0.95, 0.05]
    masses = [ck_mass(ck_set(2, n, 0.5, 0.1), p) for n in (4, 8, 16, 32, 64)]
    assert masses[-1] > 0.99
    assert masses[-1] >= masses[0]


def test_simulate_codec_is_seeded_and_consistent():
    ck = ck_set(2, 8, 0.5, 0.1)
    a = simulate_codec(ck, [0.9, 0.1], 20000, seed=5)
    b = simulate_codec(ck, [0.9, 0.1], 20000, seed=5)
    assert a == b
    assert abs(a.error_rate - a.expected_error) <= 3 * a.stderr
    assert a.expected_error == pytest.approx(1 - ck_mass(ck, [0.9, 0.1]))
