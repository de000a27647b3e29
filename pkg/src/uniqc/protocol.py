"""Project-or-substitute block compression and its average fidelity.

Alice measures {P, I - P} on the block state. On success Bob gets P psi
(renormalized); on failure he gets a fixed substitute state inside the
code subspace. For a pure block psi with q = <psi|P|psi> this gives

    rho_out = P|psi><psi|P + (1 - q)|sub><sub|
    <psi|rho_out|psi> = q^2 + (1 - q) |<sub|psi>|^2

which is what the estimators below average. A projector is described by a
``Projection``: how to turn single-signal amplitudes into per-factor rows,
and how to read (q, <sub|psi>) off a batch of block rows.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .errors import EnumerationTooLarge
from .qsource import Ensemble

BLOCK_CAP = 2**20
# rows x columns held in memory at once when enumerating blocks
CHUNK_ENTRIES = 2**22


@dataclass(frozen=True)
class Projection:
    factor_rows: Callable[[np.ndarray], np.ndarray]
    readout: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    block_dim: int


@dataclass(frozen=True)
class FidelityReport:
    mass: float
    avg_fidelity: float
    lower_bound: float
    mode: str  # "exact" | "monte_carlo"
    rate_qubits_per_signal: float
    dim: int
    n: int
    samples: Optional[int] = None
    stderr: Optional[float] = None
    metric: str = "pure"  # "pure" | "overlap" (mixed signals, tr(rho_in rho_out))

    @property
    def bound_holds(self) -> Optional[bool]:
        """avg_fidelity >= 2*mass - 1 (exactly, or within 3 standard errors)."""
        if self.metric == "overlap":
            return None
        slack = 1e-9 if self.mode == "exact" else 3 * (self.stderr or 0.0) + 1e-12
        return self.avg_fidelity >= self.lower_bound - slack

    def to_dict(self) -> dict:
        out = asdict(self)
        out["bound_holds"] = self.bound_holds
        return out


def _active(e: Ensemble) -> tuple[np.ndarray, np.ndarray]:
    keep = e.probs > 0
    return e.probs[keep], e.signal_matrix()[keep]


def exact_average(e: Ensemble, n: int, proj: Projection, cap: int = BLOCK_CAP) -> float:
    """Average block fidelity, enumerating every block with nonzero probability."""
    e = e.unravel()
    probs, vecs = _active(e)
    count = len(probs)
    if count**n > cap:
        raise EnumerationTooLarge(f"{count}**{n} blocks exceeds cap {cap}; use Monte Carlo")
    rows = proj.factor_rows(vecs)
    width = rows.shape[1]

    # enumerate a prefix explicitly, tabulate the remaining positions at once
    tail_len = n
    while tail_len > 0 and count**tail_len * width**n > CHUNK_ENTRIES:
        tail_len -= 1
    tail_rows, tail_probs = np.ones((1, 1), dtype=complex), np.ones(1)
    for _ in range(tail_len):
        tail_rows = np.kron(tail_rows, rows)
        tail_probs = np.kron(tail_probs, probs)

    terms = []
    for prefix in itertools.product(range(count), repeat=n - tail_len):
        head = np.ones(1, dtype=complex)
        p_head = 1.0
        for j in prefix:
            head = np.kron(head, rows[j])
            p_head *= probs[j]
        block = np.kron(head[None, :], tail_rows)
        q, sub = proj.readout(block)
        f = q * q + (1 - q) * np.abs(sub) ** 2
        terms.append(p_head * np.dot(tail_probs, f))
    return float(math.fsum(terms))


def _streams(seed: int, partitions: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(partitions)]


def _split(samples: int, partitions: int) -> list[int]:
    base, extra = divmod(samples, partitions)
    return [base + (i < extra) for i in range(partitions)]


def mc_average(
    e: Ensemble, n: int, proj: Projection, samples: int, seed: int, partitions: int = 4, batch: int = 4096
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the block fidelity (pure metric).

    Mixed signals are sampled as eigenstates of their density matrices.
    The sample budget is split over ``partitions`` independent seeded streams.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples")
    e = e.unravel()
    probs, vecs = _active(e)
    rows = proj.factor_rows(vecs)
    values = []
    for rng, share in zip(_streams(seed, partitions), _split(samples, partitions)):
        done = 0
        while done < share:
            k = min(batch, share - done)
            labels = rng.choice(len(probs), size=(k, n), p=probs / probs.sum())
            block = rows[labels[:, 0]]
            for pos in range(1, n):
                block = (block[:, :, None] * rows[labels[:, pos]][:, None, :]).reshape(k, -1)
            q, sub = proj.readout(block)
            values.append(q * q + (1 - q) * np.abs(sub) ** 2)
            done += k
    f = np.concatenate(values)
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(len(f)))


def mc_overlap_average(
    e: Ensemble,
    n: int,
    readout_density: Callable[[np.ndarray], float],
    samples: int,
    seed: int,
    partitions: int = 4,
) -> tuple[float, float]:
    """Monte Carlo mean of tr(rho_in rho_out) over product blocks of (possibly mixed) signals."""
    keep = e.probs > 0
    probs = e.probs[keep] / e.probs[keep].sum()
    mats = [r.matrix for r, k in zip(e.states, keep) if k]
    values = []
    for rng, share in zip(_streams(seed, partitions), _split(samples, partitions)):
        for labels in rng.choice(len(probs), size=(share, n), p=probs):
            rho = mats[labels[0]]
            for j in labels[1:]:
                rho = np.kron(rho, mats[j])
            values.append(readout_density(rho))
    f = np.array(values)
    return float(f.mean()), float(f.std(ddof=1) / math.sqrt(len(f)))


def make_report(mass, avg, mode, dim, n, samples=None, stderr=None, metric="pure") -> FidelityReport:
    rate = math.log2(dim) / n if dim > 0 else 0.0
    return FidelityReport(
        mass=float(mass),
        avg_fidelity=float(avg),
        lower_bound=float(2 * mass - 1),
        mode=mode,
        rate_qubits_per_signal=rate,
        dim=int(dim),
        n=n,
        samples=samples,
        stderr=stderr,
        metric=metric,
    )
