"""Source-specific quantum compression onto the typical subspace of rho^(x)n."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import protocol
from .errors import DimensionMismatch, EnumerationTooLarge
from .numerics import apply_tensor_power, as_vector
from .protocol import FidelityReport, Projection
from .qsource import ENUMERATION_CAP, DensityMatrix, EigenIndexSequence, Ensemble, density_of

TIE_EPS = 1e-12
# eigenvalues at or below this are treated as exact zeros of rho
ZERO_EIGENVALUE = 1e-14
PROJECT_FLOOR = 1e-14


@dataclass(frozen=True)
class TypicalSubspace:
    """Span of the rho^(x)n eigenvectors whose index sequences are weakly typical.

    Coordinates refer to the product eigenbasis of ``source`` in lexicographic
    index order; ``mask`` marks the typical coordinates.
    """

    source: DensityMatrix
    n: int
    delta: float
    mask: np.ndarray
    values: np.ndarray
    dim: int
    mass: float
    substitute: int  # flat index of the member with the largest product eigenvalue

    @property
    def member_sequences(self) -> list[EigenIndexSequence]:
        d = self.source.d
        return [
            EigenIndexSequence(idx, float(self.values[k]))
            for k, idx in enumerate(itertools.product(range(d), repeat=self.n))
            if self.mask[k]
        ]

    @property
    def rate(self) -> float:
        return math.log2(self.dim) / self.n if self.dim else 0.0

    def to_eigen_coords(self, v: np.ndarray) -> np.ndarray:
        return apply_tensor_power(self.source.eigenvectors.conj().T, self.n, v)

    def from_eigen_coords(self, w: np.ndarray) -> np.ndarray:
        return apply_tensor_power(self.source.eigenvectors, self.n, w)

    def substitute_state(self) -> np.ndarray:
        e = np.zeros(self.mask.size, dtype=complex)
        e[self.substitute] = 1
        return self.from_eigen_coords(e)

    def projection(self) -> Projection:
        vbar = self.source.eigenvectors.conj()
        mask, sub = self.mask, self.substitute

        def readout(block):
            return np.sum(np.abs(block[:, mask]) ** 2, axis=1), block[:, sub]

        return Projection(lambda rows: rows @ vbar, readout, self.mask.size)


def typical_subspace(rho: DensityMatrix, n: int, delta: float, cap: int = ENUMERATION_CAP) -> TypicalSubspace:
    """Typical subspace Lambda(n) of rho for block length n and slack delta."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if rho.d**n > cap:
        raise EnumerationTooLarge(f"{rho.d}**{n} eigen-sequences exceeds cap {cap}")
    lam = rho.eigenvalues
    positive = lam > ZERO_EIGENVALUE
    with np.errstate(divide="ignore"):
        logs = np.where(positive, np.log2(np.where(positive, lam, 1.0)), -np.inf)
    total = np.zeros(1)
    for _ in range(n):
        total = np.add.outer(total, logs).ravel()
    entropy = rho.entropy
    with np.errstate(invalid="ignore"):
        rate = -total / n
    mask = np.isfinite(total) & (np.abs(rate - entropy) <= delta + TIE_EPS)
    values = np.exp2(total)
    member_values = np.where(mask, values, -1.0)
    sub = int(np.argmax(member_values)) if mask.any() else 0
    mass = math.fsum(values[mask])
    return TypicalSubspace(rho, n, delta, mask, values, int(mask.sum()), min(mass, 1.0), sub)


def project_typical(ts: TypicalSubspace, v) -> tuple[float, np.ndarray]:
    """Measure {Pi, I - Pi}: returns (q, post-measurement state).

    q = |Pi v|^2. The state is Pi v / |Pi v| when q > 1e-14, otherwise the substitute.
    """
    v = as_vector(v)
    if v.shape[0] != ts.mask.size:
        raise DimensionMismatch(f"vector length {v.shape[0]} != {ts.mask.size}")
    w = np.where(ts.mask, ts.to_eigen_coords(v), 0)
    q = float(np.vdot(w, w).real)
    if q <= PROJECT_FLOOR:
        return q, ts.substitute_state()
    return q, ts.from_eigen_coords(w / math.sqrt(q))


def sj_fidelity_exact(e: Ensemble, n: int, delta: float, cap: int = protocol.BLOCK_CAP) -> FidelityReport:
    """Exact average fidelity of the typical-subspace protocol by enumerating all blocks.

    Mixed signals are replaced by their eigen-ensembles.
    """
    ts = typical_subspace(density_of(e), n, delta)
    avg = protocol.exact_average(e, n, ts.projection(), cap)
    return protocol.make_report(ts.mass, avg, "exact", ts.dim, n)


def sj_fidelity_mc(
    e: Ensemble,
    n: int,
    delta: float,
    samples: int,
    seed: int,
    partitions: int = 4,
    mixed_metric: str = "pure",
) -> FidelityReport:
    """Monte Carlo estimate of the same average fidelity.

    ``mixed_metric="overlap"`` instead averages tr(rho_in rho_out) over
    product blocks of the signals' density matrices; that figure is not
    bounded below by 2*mass - 1 (it is capped by the purity of rho_in).
    """
    if samples < 100:
        raise ValueError("samples must be at least 100")
    ts = typical_subspace(density_of(e), n, delta)
    if mixed_metric == "overlap" and not e.is_pure:
        avg, se = protocol.mc_overlap_average(e, n, _overlap_readout(ts), samples, seed, partitions)
        return protocol.make_report(ts.mass, avg, "monte_carlo", ts.dim, n, samples, se, metric="overlap")
    avg, se = protocol.mc_average(e, n, ts.projection(), samples, seed, partitions)
    return protocol.make_report(ts.mass, avg, "monte_carlo", ts.dim, n, samples, se)


def _overlap_readout(ts: TypicalSubspace):
    def readout(rho_in):
        vh = ts.source.eigenvectors.conj().T
        r = apply_tensor_power(vh, ts.n, apply_tensor_power(vh, ts.n, rho_in).conj().T).conj().T
        m = ts.mask
        rpp = r[np.ix_(m, m)]
        q = float(np.trace(rpp).real)
        return float(np.sum(np.abs(rpp) ** 2)) + (1 - q) * float(r[ts.substitute, ts.substitute].real)

    return readout
