"""Dense complex linear algebra used throughout the package.

Matrices and vectors are plain ``numpy`` arrays of dtype ``complex128``.
Block vectors of ``n`` factors of dimension ``d`` are flat arrays of length
``d**n`` in C order, so the first factor is the most significant index
(the same convention as ``np.kron``).
"""

from __future__ import annotations

from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, NoConvergence, NotHermitian

HERMITIAN_TOL = 1e-10
CLUSTER_GAP = 1e-9
MAX_SWEEPS = 100


class EigDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # real, descending
    eigenvectors: np.ndarray  # orthonormal columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def as_matrix(a, *, square: bool = True) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    if square and m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def as_vector(v) -> np.ndarray:
    x = np.asarray(v, dtype=complex)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("vector has non-finite entries")
    return x


def check_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    err = np.max(np.abs(h - h.conj().T)) if h.size else 0.0
    if err > tol:
        raise NotHermitian(f"matrix is not Hermitian (max |H - H^dag| = {err:.3e})")


def _round_robin(m: int):
    """Yield m-1 rounds of m/2 disjoint pairs covering every pair once (m even)."""
    players = list(range(m))
    for _ in range(m - 1):
        half = m // 2
        yield [(players[i], players[m - 1 - i]) for i in range(half)]
        players = [players[0], players[-1]] + players[1:-1]


def _jacobi_rounds(n: int):
    m = n + (n % 2)
    rounds = []
    for pairs in _round_robin(m):
        kept = [(min(p, q), max(p, q)) for p, q in pairs if p < n and q < n]
        if kept:
            p, q = zip(*kept)
            rounds.append((np.array(p), np.array(q)))
    return rounds


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate the phase of each column so its largest-magnitude entry is real positive."""
    mags = np.abs(v)
    out = v.copy()
    for j in range(v.shape[1]):
        col = mags[:, j]
        # first index within rounding of the maximum: stable under tiny perturbations
        k = int(np.flatnonzero(col >= col.max() - 1e-12)[0])
        if col[k] > 0:
            out[:, j] *= np.conj(v[k, j]) / col[k]
    return out


def _canonical_cluster_basis(vc: np.ndarray) -> np.ndarray:
    """Basis of span(vc) that depends only on the subspace, not on vc itself.

    Projects the standard basis vectors e_0, e_1, ... onto the subspace and
    Gram-Schmidts the ones with a significant component, in index order.
    """
    dim, k = vc.shape
    basis = np.zeros((dim, k), dtype=complex)
    r = 0
    for i in range(dim):
        w = vc @ np.conj(vc[i, :])
        for _ in range(2):
            w -= basis[:, :r] @ (basis[:, :r].conj().T @ w)
        nw = np.linalg.norm(w)
        if nw > 1e-3:
            basis[:, r] = w / nw
            r += 1
            if r == k:
                break
    return basis


def _canonicalize(w: np.ndarray, v: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    v = v.copy()
    gap = CLUSTER_GAP * max(1.0, scale)
    start = 0
    n = len(w)
    while start < n:
        stop = start + 1
        while stop < n and w[stop - 1] - w[stop] < gap:
            stop += 1
        if stop - start > 1:
            v[:, start:stop] = _canonical_cluster_basis(v[:, start:stop])
        start = stop
    return w, _canonical_phase(v)


def hermitian_eig(h, tol: float = HERMITIAN_TOL, max_sweeps: int = MAX_SWEEPS) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Rotations are applied in round-robin order so each round acts on disjoint
    index pairs and can be vectorized. Eigenvalues come back in descending
    order; within a degenerate cluster the eigenvectors are replaced by a
    canonical basis of the cluster's subspace, and every column's
    largest-magnitude entry is made real positive.
    """
    h = as_matrix(h)
    check_hermitian(h, tol)
    n = h.shape[0]
    if n == 0:
        return EigDecomposition(np.zeros(0), np.zeros((0, 0), dtype=complex))
    a = (h + h.conj().T) / 2
    v = np.eye(n, dtype=complex)
    fro = np.linalg.norm(a)
    scale = float(np.max(np.abs(a))) if fro > 0 else 0.0
    rounds = _jacobi_rounds(n)

    offdiag = ~np.eye(n, dtype=bool)

    def off_norm(x):
        return np.linalg.norm(x[offdiag])

    prev = np.inf
    for _sweep in range(max_sweeps + 1):
        off = off_norm(a)
        if off <= 1e-15 * fro or (off <= 1e-11 * fro and off >= 0.5 * prev):
            break
        if _sweep == max_sweeps:
            raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps (off={off:.3e})")
        prev = off
        for p, q in rounds:
            apq = a[p, q]
            mag = np.abs(apq)
            active = mag > 1e-300
            if not active.any():
                continue
            safe = np.where(active, mag, 1.0)
            app = a[p, p].real
            aqq = a[q, q].real
            tau = (aqq - app) / (2 * safe)
            sign = np.where(tau >= 0, 1.0, -1.0)
            t = np.where(active, sign / (np.abs(tau) + np.sqrt(1 + tau * tau)), 0.0)
            c = 1 / np.sqrt(1 + t * t)
            s = t * c
            ph = np.where(active, np.conj(apq) / safe, 1.0)  # conj of the phase of a_pq
            g_pp, g_pq, g_qp, g_qq = c, s, -s * ph, c * ph

            cp, cq = a[:, p], a[:, q]
            a[:, p], a[:, q] = cp * g_pp + cq * g_qp, cp * g_pq + cq * g_qq
            rp, rq = a[p, :], a[q, :]
            a[p, :] = np.conj(g_pp)[:, None] * rp + np.conj(g_qp)[:, None] * rq
            a[q, :] = np.conj(g_pq)[:, None] * rp + np.conj(g_qq)[:, None] * rq
            a[p, q] = 0
            a[q, p] = 0
            a[p, p] = a[p, p].real
            a[q, q] = a[q, q].real

            vp, vq = v[:, p], v[:, q]
            v[:, p], v[:, q] = vp * g_pp + vq * g_qp, vp * g_pq + vq * g_qq

    w, v = _canonicalize(np.diag(a).real.copy(), v, scale)
    return EigDecomposition(w, v)


def hermitian_exp(h) -> np.ndarray:
    """exp(h) for Hermitian h, via V exp(L) V^dag."""
    eig = hermitian_eig(h)
    v = eig.eigenvectors
    return (v * np.exp(eig.eigenvalues)) @ v.conj().T


def _block_shape(dims: Sequence[int], v: np.ndarray) -> tuple[np.ndarray, bool]:
    total = int(np.prod(dims)) if dims else 1
    if v.shape[0] != total:
        raise DimensionMismatch(f"vector length {v.shape[0]} does not match block dimension {total}")
    single = v.ndim == 1
    return v.reshape(tuple(dims) + (1 if single else v.shape[1],)), single


def apply_kron(factors: Sequence[np.ndarray], v) -> np.ndarray:
    """Compute (F_1 x ... x F_n) v one factor at a time.

    ``v`` may be a single vector or a 2-D array whose columns are vectors.
    Factors must be square.
    """
    v = np.asarray(v, dtype=complex)
    mats = [as_matrix(f) for f in factors]
    dims = [m.shape[1] for m in mats]
    t, single = _block_shape(dims, v)
    for axis, m in enumerate(mats):
        t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    out = t.reshape(-1) if single else t.reshape(-1, t.shape[-1])
    return np.ascontiguousarray(out)


def apply_tensor_power(a, n: int, v) -> np.ndarray:
    """(A x A x ... x A) v with n factors, without forming the d^n x d^n matrix."""
    a = as_matrix(a)
    v = np.asarray(v, dtype=complex)
    if v.shape[0] != a.shape[1] ** n:
        raise DimensionMismatch(f"vector length {v.shape[0]} != {a.shape[1]}**{n}")
    return apply_kron([a] * n, v)


class SpanBuilder:
    """Incremental Gram-Schmidt with a full reorthogonalization pass.

    A vector is rejected as dependent when its residual after projection is at
    most ``tol`` times its own norm. ``reference_norm`` (if given) also rejects
    vectors that are negligible relative to the largest input.
    """

    def __init__(self, dim: int, tol: float = 1e-9, reference_norm: float = 0.0):
        if tol <= 0:
            raise ValueError("tol must be positive")
        self.dim = dim
        self.tol = tol
        self.reference_norm = reference_norm
        self._q = np.zeros((dim, min(dim, 64)), dtype=complex)
        self.rank = 0

    @property
    def basis(self) -> np.ndarray:
        return self._q[:, : self.rank].copy()

    @property
    def full(self) -> bool:
        return self.rank == self.dim

    def residual(self, v: np.ndarray) -> np.ndarray:
        q = self._q[:, : self.rank]
        w = v - q @ (q.conj().T @ v)
        return w - q @ (q.conj().T @ w)

    def add(self, v) -> bool:
        v = np.asarray(v, dtype=complex)
        if v.shape != (self.dim,):
            raise DimensionMismatch(f"expected vector of length {self.dim}, got {v.shape}")
        nv = np.linalg.norm(v)
        if nv == 0 or nv <= self.tol * self.reference_norm or self.full:
            return False
        w = self.residual(v)
        nw = np.linalg.norm(w)
        if nw <= self.tol * nv:
            return False
        if self.rank == self._q.shape[1]:
            grown = np.zeros((self.dim, min(self.dim, 2 * self.rank)), dtype=complex)
            grown[:, : self.rank] = self._q
            self._q = grown
        self._q[:, self.rank] = w / nw
        self.rank += 1
        return True


def orthonormal_span(vectors: Iterable, tol: float = 1e-9) -> tuple[np.ndarray, int]:
    """Orthonormal basis (as columns) of the span of ``vectors`` and its rank."""
    vecs = [as_vector(v) for v in vectors]
    if not vecs:
        raise EmptyInput("orthonormal_span needs at least one vector")
    dim = vecs[0].shape[0]
    if any(v.shape[0] != dim for v in vecs):
        raise DimensionMismatch("all vectors must have the same dimension")
    ref = max(np.linalg.norm(v) for v in vecs)
    builder = SpanBuilder(dim, tol, reference_norm=ref)
    for v in vecs:
        builder.add(v)
        if builder.full:
            break
    return builder.basis, builder.rank


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random d x d unitary: QR of a complex Ginibre matrix with the R-diagonal phases removed."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_state_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return z / np.linalg.norm(z)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (z + z.conj().T) / 2


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    u = np.asarray(u, dtype=complex)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol
