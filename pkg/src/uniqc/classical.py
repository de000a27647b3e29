"""Classical source coding: typical sets, types and the Csiszar-Korner universal set.

The universal set ``CK(n)`` is realized as the union of all type classes
whose empirical entropy is at most ``S + delta/2``. Member sequences are
numbered by enumerative coding: type classes in colexicographic order of
their count vectors, sequences inside a class in lexicographic order.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    CodewordOutOfRange,
    EnumerationTooLarge,
    LengthMismatch,
    SymbolOutOfRange,
)

ENUMERATION_CAP = 2**24
# slack for membership tests that sit exactly on a threshold (e.g. uniform sources)
TIE_EPS = 1e-12


@dataclass(frozen=True)
class Distribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float).copy()
        if p.ndim != 1 or p.size == 0:
            raise ValueError("distribution must be a non-empty 1-D vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def d(self) -> int:
        return self.probs.size

    @property
    def entropy(self) -> float:
        return shannon_entropy(self)


def _as_distribution(p) -> Distribution:
    return p if isinstance(p, Distribution) else Distribution(p)


def _entropy_of(probs) -> float:
    terms = [-x * math.log2(x) for x in probs if x > 0]
    return max(0.0, math.fsum(terms))


def shannon_entropy(p) -> float:
    """Shannon entropy in bits, with 0 log 0 = 0."""
    return _entropy_of(_as_distribution(p).probs)


class TypeClass(NamedTuple):
    counts: tuple[int, ...]
    n: int

    @property
    def entropy(self) -> float:
        return _entropy_of([c / self.n for c in self.counts])

    @property
    def size(self) -> int:
        return multinomial(self.counts)


def multinomial(counts: Sequence[int]) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


def type_of(x: Sequence[int], d: int) -> TypeClass:
    if len(x) == 0:
        raise ValueError("type of an empty sequence is undefined")
    counts = [0] * d
    for s in x:
        if not 0 <= s < d:
            raise SymbolOutOfRange(f"symbol {s} outside alphabet of size {d}")
        counts[s] += 1
    return TypeClass(tuple(counts), len(x))


def compositions(n: int, d: int) -> list[tuple[int, ...]]:
    """All count vectors of length d summing to n, in colexicographic order."""
    out = []
    for bars in itertools.combinations(range(n + d - 1), d - 1):
        prev, parts = -1, []
        for b in bars:
            parts.append(b - prev - 1)
            prev = b
        parts.append(n + d - 2 - prev)
        out.append(tuple(parts))
    out.sort(key=lambda c: c[::-1])
    return out


def _log_type_prob(counts: Sequence[int], probs: np.ndarray) -> float:
    """log of the probability of one particular sequence of this type (natural log)."""
    total = 0.0
    for c, p in zip(counts, probs):
        if c == 0:
            continue
        if p == 0:
            return -math.inf
        total += c * math.log(p)
    return total


def _type_mass(counts: Sequence[int], probs: np.ndarray) -> float:
    lp = _log_type_prob(counts, probs)
    if lp == -math.inf:
        return 0.0
    return math.exp(math.log(multinomial(counts)) + lp)


@dataclass(frozen=True)
class TypicalSet:
    """Weakly typical sequences of an i.i.d. source.

    ``members`` is populated only in explicit mode; ``size`` and ``mass`` are
    always exact (computed per type class).
    """

    source: Distribution
    n: int
    delta: float
    size: int
    mass: float
    member_types: tuple[TypeClass, ...]
    members: tuple[tuple[int, ...], ...] | None = None

    def contains(self, x: Sequence[int]) -> bool:
        if len(x) != self.n:
            return False
        return is_weakly_typical(type_of(x, self.source.d).counts, self.source, self.delta)


def is_weakly_typical(counts: Sequence[int], p: Distribution, delta: float) -> bool:
    n = sum(counts)
    lp = _log_type_prob(counts, p.probs)
    if lp == -math.inf:
        return False
    rate = -lp / (n * math.log(2))
    return abs(rate - p.entropy) <= delta + TIE_EPS


def typical_set(p, n: int, delta: float, *, explicit: bool = True, cap: int = ENUMERATION_CAP) -> TypicalSet:
    """Sequences x with |-(1/n) log2 p(x) - H(p)| <= delta."""
    p = _as_distribution(p)
    if delta <= 0:
        raise ValueError("delta must be positive")
    if n < 1:
        raise ValueError("n must be at least 1")
    if explicit and p.d**n > cap:
        raise EnumerationTooLarge(f"{p.d}**{n} sequences exceeds cap {cap}; use explicit=False")
    types = tuple(TypeClass(c, n) for c in compositions(n, p.d) if is_weakly_typical(c, p, delta))
    size = sum(t.size for t in types)
    mass = math.fsum(_type_mass(t.counts, p.probs) for t in types)
    members = None
    if explicit:
        keep = {t.counts for t in types}
        members = tuple(x for x in itertools.product(range(p.d), repeat=n) if type_of(x, p.d).counts in keep)
    return TypicalSet(p, n, delta, size, min(mass, 1.0), types, members)


@dataclass(frozen=True)
class CKSet:
    n: int
    d: int
    S: float
    delta: float
    entropy_budget: float
    member_types: tuple[TypeClass, ...]
    total_size: int
    _offsets: tuple[int, ...] = field(repr=False)
    _index: dict = field(repr=False, compare=False)

    def __contains__(self, x) -> bool:
        try:
            return type_of(x, self.d).counts in self._index and len(x) == self.n
        except SymbolOutOfRange:
            return False

    @property
    def size_bound(self) -> float:
        """(n+1)^d 2^(n * entropy_budget): the method-of-types ceiling on total_size."""
        return (self.n + 1) ** self.d * 2.0 ** (self.n * self.entropy_budget)

    @property
    def rate(self) -> float:
        """Bits per symbol of a fixed-length codeword, ceil(log2 |CK|)/n."""
        return math.ceil(math.log2(self.total_size)) / self.n if self.total_size > 1 else 0.0

    def sequences(self):
        """Member sequences in codeword order."""
        for t in self.member_types:
            yield from _type_class_sequences(t.counts)


def _type_class_sequences(counts: Sequence[int]):
    """Sequences with the given symbol counts, in lexicographic order."""
    counts = list(counts)
    n = sum(counts)
    seq = [0] * n

    def rec(pos):
        if pos == n:
            yield tuple(seq)
            return
        for s, c in enumerate(counts):
            if c:
                counts[s] -= 1
                seq[pos] = s
                yield from rec(pos + 1)
                counts[s] += 1

    yield from rec(0)


def ck_set(d: int, n: int, S: float, delta: float) -> CKSet:
    """Union of the type classes with empirical entropy <= S + delta/2."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    if delta <= 0:
        raise ValueError("delta must be positive")
    if S < 0 or S > math.log2(d) + 1e-12:
        raise ValueError(f"S must lie in [0, log2 d] = [0, {math.log2(d):.6g}]")
    budget = S + delta / 2
    types = tuple(TypeClass(c, n) for c in compositions(n, d) if TypeClass(c, n).entropy <= budget + TIE_EPS)
    offsets, total = [], 0
    for t in types:
        offsets.append(total)
        total += t.size
    index = {t.counts: i for i, t in enumerate(types)}
    return CKSet(n, d, S, delta, budget, types, total, tuple(offsets), index)


def ck_mass(ck: CKSet, p) -> float:
    """Probability of CK(n) under the i.i.d. source p."""
    p = _as_distribution(p)
    if p.d != ck.d:
        raise ValueError(f"distribution over {p.d} symbols, CK set over {ck.d}")
    return min(1.0, math.fsum(_type_mass(t.counts, p.probs) for t in ck.member_types))


def rank_in_type(x: Sequence[int], d: int) -> int:
    """Lexicographic rank of x among all sequences of the same type."""
    counts = list(type_of(x, d).counts)
    rank = 0
    for s in x:
        # sequences that put a smaller symbol here come first
        for smaller in range(s):
            if counts[smaller]:
                counts[smaller] -= 1
                rank += multinomial(counts)
                counts[smaller] += 1
        counts[s] -= 1
    return rank


def unrank_in_type(counts: Sequence[int], rank: int) -> tuple[int, ...]:
    counts = list(counts)
    n = sum(counts)
    if not 0 <= rank < multinomial(counts):
        raise CodewordOutOfRange(f"rank {rank} outside type class of size {multinomial(counts)}")
    out = []
    for _ in range(n):
        for s, c in enumerate(counts):
            if not c:
                continue
            counts[s] -= 1
            block = multinomial(counts)
            if rank < block:
                out.append(s)
                break
            rank -= block
            counts[s] += 1
    return tuple(out)


class Encoded(NamedTuple):
    codeword: int
    atypical: bool


def ck_encode(ck: CKSet, x: Sequence[int]) -> Encoded:
    """Codeword for x; atypical inputs are flagged and mapped to codeword 0."""
    if len(x) != ck.n:
        raise LengthMismatch(f"sequence length {len(x)} != block length {ck.n}")
    counts = type_of(x, ck.d).counts
    i = ck._index.get(counts)
    if i is None:
        return Encoded(0, True)
    return Encoded(ck._offsets[i] + rank_in_type(x, ck.d), False)


def ck_decode(ck: CKSet, codeword: int) -> tuple[int, ...]:
    if not 0 <= codeword < ck.total_size:
        raise CodewordOutOfRange(f"codeword {codeword} outside [0, {ck.total_size})")
    i = bisect.bisect_right(ck._offsets, codeword) - 1
    return unrank_in_type(ck.member_types[i].counts, codeword - ck._offsets[i])


class CodecTrial(NamedTuple):
    blocks: int
    errors: int
    error_rate: float
    expected_error: float
    stderr: float  # binomial standard error at the expected error rate


def simulate_codec(ck: CKSet, p, blocks: int, seed: int) -> CodecTrial:
    """Monte Carlo block-error rate of the CK codec on an i.i.d. source.

    A block counts as an error when decoding does not return the source block.
    """
    p = _as_distribution(p)
    rng = np.random.default_rng(seed)
    draws = rng.choice(ck.d, size=(blocks, ck.n), p=p.probs)
    cache: dict[tuple[int, ...], bool] = {}
    errors = 0
    for row in draws:
        x = tuple(int(s) for s in row)
        ok = cache.get(x)
        if ok is None:
            enc = ck_encode(ck, x)
            ok = ck_decode(ck, enc.codeword) == x
            cache[x] = ok
        errors += not ok
    expected = 1.0 - ck_mass(ck, p)
    se = math.sqrt(max(expected * (1 - expected), 0.0) / blocks)
    return CodecTrial(blocks, errors, errors / blocks, expected, se)
