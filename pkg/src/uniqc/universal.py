"""Universal quantum compression subspace.

Upsilon(S, n, delta) is the smallest subspace of H^(x)n containing
U^(x)n phi for every unitary U and every CK-labelled product basis state
phi. Here it is built from the larger spanning set

    { Sym(E_{a1 b1} x ... x E_{an bn}) phi }

where Sym sums over all n! position permutations and E_{ab} = |a><b| are
matrix units. Those symmetrized operators span SYM(M_d), which is the span
of all A^(x)n, so the result contains every rotated CK subspace.
``random_unitary_span_rank`` builds the same space from sampled unitaries
as an independent check.

Labels are 0-based: basis states |0>, ..., |d-1>, matrix units (a, b) with
a, b in range(d).
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import protocol
from .classical import CKSet, _type_class_sequences, ck_set, compositions
from .errors import (
    DimensionMismatch,
    EntropyBudgetExceeded,
    EnumerationTooLarge,
    LabelOutOfRange,
    NotUnitary,
)
from .numerics import SpanBuilder, apply_tensor_power, haar_unitary, is_unitary
from .protocol import FidelityReport, Projection
from .qsource import Ensemble, density_of

ENUMERATION_CAP = 2**12
RANK_TOL = 1e-9


def sym_dim(d: int, n: int) -> int:
    """Dimension of the symmetric subspace of (C^d)^(x)n: C(n+d-1, d-1)."""
    if d < 1 or n < 1:
        raise ValueError("d and n must be positive")
    return math.comb(n + d - 1, d - 1)


def sym_dim_overestimate(d: int, n: int) -> int:
    return (n + 1) ** d


class SymOperatorBasis(NamedTuple):
    """Multisets of n matrix-unit labels, one per spanning element of SYM(M_d)."""

    d: int
    n: int
    generators: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def count(self) -> int:
        return len(self.generators)


def sym_operator_basis(d: int, n: int) -> SymOperatorBasis:
    """All size-n multisets of labels (a, b), colexicographic in their count vectors."""
    labels = [(a, b) for a in range(d) for b in range(d)]
    gens = []
    for counts in compositions(n, d * d):
        gens.append(tuple(lab for lab, c in zip(labels, counts) for _ in range(c)))
    return SymOperatorBasis(d, n, tuple(gens))


def _flat_index(seq: Sequence[int], d: int) -> int:
    k = 0
    for s in seq:
        k = k * d + s
    return k


def sym_generator_apply(gen: Sequence[tuple[int, int]], phi: Sequence[int], d: int) -> np.ndarray:
    """Apply sum_sigma (E_{a_s(1) b_s(1)} x ... x E_{a_s(n) b_s(n)}) to the basis state |phi>.

    Only permutations whose b-labels reproduce phi survive; each distinct
    arrangement of the pairs is hit by prod(multiplicity!) permutations.
    """
    n = len(phi)
    if len(gen) != n:
        raise DimensionMismatch(f"generator has {len(gen)} factors, state has {n}")
    for a, b in gen:
        if not (0 <= a < d and 0 <= b < d):
            raise LabelOutOfRange(f"matrix unit ({a}, {b}) outside range({d})")
    if any(not 0 <= s < d for s in phi):
        raise LabelOutOfRange(f"basis label outside range({d})")
    out = np.zeros(d**n)
    positions = defaultdict(list)
    for k, s in enumerate(phi):
        positions[s].append(k)
    targets = defaultdict(list)
    for a, b in gen:
        targets[b].append(a)
    if any(len(targets[b]) != len(positions[b]) for b in set(targets) | set(positions)):
        return out
    weight = math.prod(math.factorial(m) for m in Counter(gen).values())

    groups = []
    for b, pos in positions.items():
        counts = Counter(targets[b])
        arrangements = list(_type_class_sequences([counts.get(a, 0) for a in range(d)]))
        groups.append((pos, arrangements))
    seq = list(phi)
    for choice in itertools.product(*(arr for _, arr in groups)):
        for (pos, _), arr in zip(groups, choice):
            for k, a in zip(pos, arr):
                seq[k] = a
        out[_flat_index(seq, d)] += weight
    return out


@dataclass(frozen=True)
class UniversalSubspace:
    d: int
    n: int
    S: float
    delta: float
    basis: np.ndarray  # d^n x dim, orthonormal columns
    ck: CKSet

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @property
    def rate(self) -> float:
        return math.log2(self.dim) / self.n

    @property
    def dim_bound(self) -> float:
        """(n+1)^(d^2) 2^(n(S+delta))."""
        return (self.n + 1) ** (self.d * self.d) * 2.0 ** (self.n * (self.S + self.delta))

    @property
    def satisfies_dim_bound(self) -> bool:
        return self.dim <= self.dim_bound

    @property
    def xi_dim(self) -> int:
        """Dimension of the CK subspace in the fixed basis."""
        return self.ck.total_size

    def project(self, v: np.ndarray) -> np.ndarray:
        b = self.basis
        return b @ (b.conj().T @ v)

    def residual_norms(self, vectors: np.ndarray) -> np.ndarray:
        """|(I - P) v| for each column v."""
        r = vectors - self.project(vectors)
        return np.linalg.norm(r, axis=0)

    def ck_vectors(self) -> np.ndarray:
        """CK(B0) basis states as columns."""
        idx = [_flat_index(x, self.d) for x in self.ck.sequences()]
        e = np.zeros((self.d**self.n, len(idx)), dtype=complex)
        e[idx, np.arange(len(idx))] = 1
        return e

    def projection(self) -> Projection:
        bbar = self.basis.conj()
        sub = bbar[:, 0]

        def readout(block):
            c = block @ bbar
            return np.sum(np.abs(c) ** 2, axis=1), block @ sub

        return Projection(lambda rows: rows, readout, self.basis.shape[0])

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "S": self.S,
            "delta": self.delta,
            "dim": self.dim,
            "rate": self.rate,
            "dim_bound": self.dim_bound,
            "columns": [[[float(z.real), float(z.imag)] for z in col] for col in self.basis.T],
        }


def _generators_by_b_counts(d: int, n: int) -> dict[tuple[int, ...], list]:
    groups = defaultdict(list)
    for gen in sym_operator_basis(d, n).generators:
        counts = [0] * d
        for _, b in gen:
            counts[b] += 1
        groups[tuple(counts)].append(gen)
    return groups


def build_upsilon(d: int, n: int, S: float, delta: float, cap: int = ENUMERATION_CAP, tol: float = RANK_TOL) -> UniversalSubspace:
    """Orthonormal basis of Upsilon, processing CK states in codeword order.

    For each phi only generators whose b-labels match phi's symbol counts are
    applied; all others annihilate phi.
    """
    if d**n > cap:
        raise EnumerationTooLarge(f"block dimension {d}**{n} exceeds cap {cap}")
    ck = ck_set(d, n, S, delta)
    gens = _generators_by_b_counts(d, n)
    builder = SpanBuilder(d**n, tol)
    for phi in ck.sequences():
        if builder.full:
            break
        counts = [0] * d
        for s in phi:
            counts[s] += 1
        for gen in gens[tuple(counts)]:
            builder.add(sym_generator_apply(gen, phi, d))
            if builder.full:
                break
    return UniversalSubspace(d, n, S, delta, builder.basis, ck)


def contains_rotated_ck(ups: UniversalSubspace, u) -> float:
    """Largest residual |(I - P_Upsilon) U^(x)n phi| over phi in CK(B0)."""
    u = np.asarray(u, dtype=complex)
    if u.shape != (ups.d, ups.d) or not is_unitary(u):
        raise NotUnitary("expected a d x d unitary matrix")
    rotated = apply_tensor_power(u, ups.n, ups.ck_vectors())
    return float(np.max(ups.residual_norms(rotated)))


def random_unitary_span_rank(
    d: int, n: int, S: float, delta: float, unitaries: int = 300, seed: int = 0, tol: float = RANK_TOL, chunk: int = 20
) -> int:
    """Rank of span{U_k^(x)n phi : k < unitaries, phi in CK(B0)} for Haar-random U_k.

    Rank is tracked by SVD of [current row basis; new vectors] with a
    relative singular-value cutoff.
    """
    ck = ck_set(d, n, S, delta)
    idx = [_flat_index(x, d) for x in ck.sequences()]
    e = np.zeros((d**n, len(idx)), dtype=complex)
    e[idx, np.arange(len(idx))] = 1
    rng = np.random.default_rng(seed)
    rows = np.zeros((0, d**n), dtype=complex)
    for start in range(0, unitaries, chunk):
        batch = [apply_tensor_power(haar_unitary(d, rng), n, e).T for _ in range(min(chunk, unitaries - start))]
        m = np.vstack([rows] + batch)
        _, s, vh = np.linalg.svd(m, full_matrices=False)
        keep = s > tol * s[0]
        rows = vh[keep]
    return rows.shape[0]


def universal_fidelity(
    e: Ensemble,
    ups: UniversalSubspace,
    mode: str = "exact",
    samples: int | None = None,
    seed: int | None = None,
    partitions: int = 4,
) -> FidelityReport:
    """Run the project-or-substitute protocol with P_Upsilon on the source e.

    The substitute state is the first basis column of Upsilon.
    """
    if e.d != ups.d:
        raise DimensionMismatch(f"source dimension {e.d} != subspace dimension {ups.d}")
    rho = density_of(e)
    if rho.entropy > ups.S + 1e-9:
        warnings.warn(
            f"source entropy {rho.entropy:.6f} exceeds the budget S={ups.S}; the guarantee does not apply",
            EntropyBudgetExceeded,
            stacklevel=2,
        )
    mass = upsilon_mass(rho.matrix, ups)
    proj = ups.projection()
    if mode == "exact":
        avg = protocol.exact_average(e, ups.n, proj)
        return protocol.make_report(mass, avg, "exact", ups.dim, ups.n)
    if mode in ("mc", "monte_carlo"):
        if samples is None or seed is None:
            raise ValueError("Monte Carlo mode needs samples and seed")
        avg, se = protocol.mc_average(e, ups.n, proj, samples, seed, partitions)
        return protocol.make_report(mass, avg, "monte_carlo", ups.dim, ups.n, samples, se)
    raise ValueError(f"unknown mode {mode!r}")


def upsilon_mass(rho: np.ndarray, ups: UniversalSubspace) -> float:
    """tr(rho^(x)n P_Upsilon) = sum_j <b_j| rho^(x)n |b_j>."""
    b = ups.basis
    return float(np.real(np.sum(b.conj() * apply_tensor_power(rho, ups.n, b))))


class RateRow(NamedTuple):
    n: int
    dim: int
    rate: float
    bound: float


def rate_curve(d: int, S: float, delta: float, n_list: Sequence[int]) -> list[RateRow]:
    """log2(dim Upsilon)/n against S + delta + d^2 log2(n+1)/n."""
    rows = []
    for n in n_list:
        ups = build_upsilon(d, n, S, delta)
        rows.append(RateRow(n, ups.dim, ups.rate, S + delta + d * d * math.log2(n + 1) / n))
    return rows


def export_basis(ups: UniversalSubspace, path) -> None:
    with open(path, "w") as fh:
        json.dump(ups.to_json(), fh)


def load_basis(path) -> np.ndarray:
    with open(path) as fh:
        doc = json.load(fh)
    cols = np.array(doc["columns"], dtype=float)
    if cols.size == 0:
        return np.zeros((doc["d"] ** doc["n"], 0), dtype=complex)
    return (cols[..., 0] + 1j * cols[..., 1]).T
