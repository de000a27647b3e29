"""Quantum sources: density matrices, ensembles and the eigenstructure of rho^(x)n."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import EnumerationTooLarge, InvalidState, MixedSignalsNeedDensityForm
from .numerics import EigDecomposition, as_matrix, as_vector, check_hermitian, hermitian_eig

ENUMERATION_CAP = 2**24
CLAMP = 1e-10


class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite d x d matrix.

    The eigendecomposition is computed once at construction. Eigenvalues in
    [-1e-10, 0) are clamped to zero.
    """

    __slots__ = ("matrix", "eig")

    def __init__(self, matrix, tol: float = 1e-10):
        m = as_matrix(matrix)
        check_hermitian(m, tol)
        m = (m + m.conj().T) / 2
        tr = np.trace(m).real
        if abs(tr - 1) > tol:
            raise InvalidState(f"trace is {tr!r}, not 1")
        eig = hermitian_eig(m)
        if eig.eigenvalues.size and eig.eigenvalues[-1] < -CLAMP:
            raise InvalidState(f"negative eigenvalue {eig.eigenvalues[-1]!r}")
        w = np.where(eig.eigenvalues < 0, 0.0, eig.eigenvalues)
        m.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "eig", EigDecomposition(w, eig.eigenvectors))

    def __setattr__(self, name, value):
        raise AttributeError("DensityMatrix is immutable")

    def __repr__(self):
        return f"DensityMatrix(d={self.d}, eigenvalues={np.round(self.eigenvalues, 6).tolist()})"

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        v = _normalized(psi)
        return cls(np.outer(v, v.conj()))

    @property
    def d(self) -> int:
        return self.matrix.shape[0]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.eig.eigenvalues

    @property
    def eigenvectors(self) -> np.ndarray:
        return self.eig.eigenvectors

    @property
    def entropy(self) -> float:
        return von_neumann_entropy(self)

    def expectation(self, observable) -> float:
        return float(np.trace(self.matrix @ np.asarray(observable, dtype=complex)).real)


def _normalized(psi, tol: float = 1e-10) -> np.ndarray:
    v = as_vector(psi)
    nv = np.linalg.norm(v)
    if abs(nv - 1) > tol:
        raise InvalidState(f"state vector has norm {nv!r}, not 1")
    return v


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """-tr rho log2 rho over the (clamped) eigenvalues."""
    return max(0.0, math.fsum(-x * math.log2(x) for x in rho.eigenvalues if x > 0))


class Ensemble:
    """Signals emitted i.i.d. with given probabilities.

    Each state is either a normalized amplitude vector (pure signal) or a
    density matrix (mixed signal).
    """

    def __init__(self, probs: Sequence[float], states: Sequence):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or len(p) != len(states) or len(p) == 0:
            raise ValueError("need one probability per signal")
        if np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
            raise ValueError("signal probabilities must be non-negative and sum to 1")
        vectors: list[np.ndarray | None] = []
        rhos: list[DensityMatrix] = []
        for s in states:
            if isinstance(s, DensityMatrix):
                vectors.append(None)
                rhos.append(s)
                continue
            arr = np.asarray(s, dtype=complex)
            if arr.ndim == 1:
                v = _normalized(arr)
                vectors.append(v)
                rhos.append(DensityMatrix.pure(v))
            else:
                vectors.append(None)
                rhos.append(DensityMatrix(arr))
        dims = {r.d for r in rhos}
        if len(dims) != 1:
            raise ValueError(f"signals have mixed dimensions {sorted(dims)}")
        self.probs = p
        self.vectors = vectors
        self.states = rhos
        self.d = dims.pop()

    def __len__(self):
        return len(self.probs)

    @property
    def is_pure(self) -> bool:
        return all(v is not None for v in self.vectors)

    @classmethod
    def pure(cls, probs, vectors) -> "Ensemble":
        return cls(probs, [np.asarray(v, dtype=complex) for v in vectors])

    def signal_matrix(self) -> np.ndarray:
        """Pure signal vectors as rows (N x d)."""
        if not self.is_pure:
            raise MixedSignalsNeedDensityForm("ensemble has mixed signals; unravel it first")
        return np.array(self.vectors)

    def unravel(self) -> "Ensemble":
        """Equivalent pure ensemble: each mixed signal replaced by its eigen-ensemble.

        The average density matrix is unchanged. Pure signals pass through.
        """
        if self.is_pure:
            return self
        probs, vecs = [], []
        for p, v, rho in zip(self.probs, self.vectors, self.states):
            if v is not None:
                probs.append(p)
                vecs.append(v)
                continue
            for lam, col in zip(rho.eigenvalues, rho.eigenvectors.T):
                if lam > 0:
                    probs.append(p * lam)
                    vecs.append(col / np.linalg.norm(col))
        probs = np.array(probs)
        return Ensemble(probs / probs.sum(), vecs)


def density_of(e: Ensemble) -> DensityMatrix:
    """sum_i p_i rho_i, re-symmetrized before diagonalization."""
    m = sum(p * r.matrix for p, r in zip(e.probs, e.states))
    m = (m + m.conj().T) / 2
    return DensityMatrix(m / np.trace(m).real)


class Block(NamedTuple):
    labels: tuple[int, ...]
    state: np.ndarray  # d^n vector (pure) or d^n x d^n matrix (density form)


def sample_block(e: Ensemble, n: int, seed, form: str = "auto") -> Block:
    """Draw n signals i.i.d. and return their labels and the product state.

    ``form`` is "vector", "density" or "auto" (vector when all signals are pure).
    """
    if form == "auto":
        form = "vector" if e.is_pure else "density"
    if form == "vector" and not e.is_pure:
        raise MixedSignalsNeedDensityForm("mixed signals have no state vector; use form='density'")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    labels = tuple(int(i) for i in rng.choice(len(e), size=n, p=e.probs))
    if form == "vector":
        state = reduce(np.kron, [e.vectors[i] for i in labels])
    else:
        state = reduce(np.kron, [e.states[i].matrix for i in labels])
    return Block(labels, state)


class EigenIndexSequence(NamedTuple):
    indices: tuple[int, ...]
    value: float


def product_eigenvalues(eigenvalues: np.ndarray, n: int) -> np.ndarray:
    """All d^n products lambda_{i1}...lambda_{in}, in lexicographic index order.

    Products are formed in log space; sequences containing a zero eigenvalue get 0.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    with np.errstate(divide="ignore"):
        logs = np.log(lam)
    total = np.zeros(1)
    for _ in range(n):
        total = np.add.outer(total, logs).ravel()
    return np.exp(total)


def eigen_sequences(rho: DensityMatrix, n: int, cap: int = ENUMERATION_CAP) -> Iterator[EigenIndexSequence]:
    """Index sequences of rho's eigenbasis with their product eigenvalues."""
    if rho.d**n > cap:
        raise EnumerationTooLarge(f"{rho.d}**{n} eigen-sequences exceeds cap {cap}")
    values = product_eigenvalues(rho.eigenvalues, n)
    for k, idx in enumerate(itertools.product(range(rho.d), repeat=n)):
        yield EigenIndexSequence(idx, float(values[k]))
