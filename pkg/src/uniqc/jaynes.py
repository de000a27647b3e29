"""Maximum-entropy state reconstruction from measured mean values.

The maximizer of S(rho) subject to tr(rho O_k) = m_k has the form
rho(lam) = exp(sum_k lam_k O_k) / Z(lam), where lam minimizes the convex dual

    F(lam) = log Z(lam) - sum_k lam_k m_k.

When the constraints force the maximizer onto the boundary (rank-deficient
rho, e.g. <sigma_z> = 1) the dual has no minimizer; the solver then restricts
the problem to the support of the limiting state and solves it there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InconsistentTrial, Infeasible
from .numerics import as_matrix, check_hermitian, hermitian_eig
from .qsource import DensityMatrix, Ensemble, density_of, von_neumann_entropy
from .universal import build_upsilon, universal_fidelity

GRAD_TOL = 1e-10
MAX_ITER = 200
INFEASIBLE_FLOOR = 1e-6
# eigenvalues of rho(lam) below this mark a candidate boundary solution
SUPPORT_CUTOFF = 1e-8

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class ConstraintSet:
    observables: tuple
    means: tuple
    d: int = field(init=False)

    def __post_init__(self):
        obs = tuple(as_matrix(o) for o in self.observables)
        means = tuple(float(m) for m in self.means)
        if len(obs) != len(means):
            raise ValueError("need one mean value per observable")
        for o in obs:
            check_hermitian(o)
        dims = {o.shape[0] for o in obs}
        if len(dims) > 1:
            raise ValueError(f"observables have different dimensions {sorted(dims)}")
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "d", dims.pop() if dims else 0)

    @classmethod
    def qubit(cls, **means) -> "ConstraintSet":
        """Pauli constraints, e.g. ``ConstraintSet.qubit(z=0.8)``."""
        paulis = {"x": PAULI_X, "y": PAULI_Y, "z": PAULI_Z}
        keys = sorted(means)
        return cls(tuple(paulis[k] for k in keys), tuple(means[k] for k in keys))

    def residuals(self, rho: np.ndarray) -> np.ndarray:
        return np.array([abs(np.trace(rho @ o).real - m) for o, m in zip(self.observables, self.means)])

    def restricted(self, w: np.ndarray) -> "ConstraintSet":
        return ConstraintSet(tuple(w.conj().T @ o @ w for o in self.observables), self.means)


@dataclass(frozen=True)
class JaynesResult:
    state: DensityMatrix
    entropy: float
    dual_params: np.ndarray
    residuals: np.ndarray
    objective_history: tuple = ()
    boundary: bool = False
    iterations: int = 0


def _dual(lam, obs, means, d):
    """F(lam), its gradient and Hessian, and rho(lam)."""
    k = sum((l * o for l, o in zip(lam, obs)), np.zeros((d, d), dtype=complex))
    eig = hermitian_eig((k + k.conj().T) / 2)
    eps, v = eig.eigenvalues, eig.eigenvectors
    top = eps[0]
    w = np.exp(eps - top)
    z = w.sum()
    p = w / z
    log_z = top + math.log(z)
    rho = (v * p) @ v.conj().T
    f = log_z - float(np.dot(lam, means))
    rotated = [v.conj().T @ o @ v for o in obs]
    expect = np.array([float(np.dot(p, np.diag(r).real)) for r in rotated])
    grad = expect - np.asarray(means)
    # divided differences of exp, normalized by Z
    de = eps[:, None] - eps[None, :]
    close = np.abs(de) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        dd = np.where(close, (p[:, None] + p[None, :]) / 2, (p[:, None] - p[None, :]) / np.where(close, 1.0, de))
    m = len(obs)
    hess = np.empty((m, m))
    for a in range(m):
        for b in range(a, m):
            val = float(np.sum(dd * rotated[a] * rotated[b].T).real) - expect[a] * expect[b]
            hess[a, b] = hess[b, a] = val
    return f, grad, hess, rho


def _newton(obs, means, d):
    lam = np.zeros(len(obs))
    f, g, h, rho = _dual(lam, obs, means, d)
    history = [f]
    it = 0
    for it in range(1, MAX_ITER + 1):
        if np.max(np.abs(g)) <= GRAD_TOL:
            break
        step = -np.linalg.lstsq(h, g, rcond=1e-12)[0]
        slope = float(np.dot(g, step))
        if slope >= 0:
            step, slope = -g, -float(np.dot(g, g))
        t = 1.0
        while t > 1e-12:
            cand = _dual(lam + t * step, obs, means, d)
            if cand[0] <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        lam = lam + t * step
        f, g, h, rho = cand
        history.append(f)
    return lam, rho, history, it


def max_entropy_state(c: ConstraintSet, d: int | None = None) -> JaynesResult:
    """Maximum-entropy density matrix consistent with the constraints."""
    d = d or c.d
    if not d:
        raise ValueError("dimension unknown: pass d when there are no observables")
    obs = c.observables
    if not obs:
        rho = DensityMatrix(np.eye(d) / d)
        return JaynesResult(rho, von_neumann_entropy(rho), np.zeros(0), np.zeros(0))

    lam, rho, history, iters = _newton(obs, c.means, d)
    res = c.residuals(rho)
    boundary = False
    if hermitian_eig(rho).eigenvalues[-1] < SUPPORT_CUTOFF or np.max(res) > GRAD_TOL:
        reduced = _boundary_state(c, rho, d)
        if reduced is not None:
            red_res = c.residuals(reduced)
            if np.max(red_res) <= max(GRAD_TOL, np.max(res)):
                rho, res, boundary = reduced, red_res, True
    if np.max(res) > INFEASIBLE_FLOOR:
        raise Infeasible(f"no density matrix matches the means (residual {np.max(res):.3e})")
    state = DensityMatrix((rho + rho.conj().T) / 2 / np.trace(rho).real)
    return JaynesResult(state, von_neumann_entropy(state), lam, res, tuple(history), boundary, iters)


def _boundary_state(c: ConstraintSet, rho: np.ndarray, d: int) -> np.ndarray | None:
    vals, vecs = hermitian_eig(rho)
    support = vecs[:, vals >= SUPPORT_CUTOFF]
    r = support.shape[1]
    if r == 0 or r == d:
        return None
    if r == 1:
        return np.outer(support[:, 0], support[:, 0].conj())
    try:
        sub = max_entropy_state(c.restricted(support), r)
    except Infeasible:
        return None
    return support @ sub.state.matrix @ support.conj().T


@dataclass(frozen=True)
class TrialOutcome:
    entropy: float
    entropy_ok: bool
    mass: float
    avg_fidelity: float
    lower_bound: float
    bound_holds: bool


@dataclass(frozen=True)
class CompressionCheck:
    jaynes_entropy: float
    dim: int
    rate: float
    trials: tuple

    @property
    def all_ok(self) -> bool:
        return all(t.entropy_ok and t.bound_holds for t in self.trials)


def jaynes_compression_check(
    c: ConstraintSet, trial_ensembles: Sequence[Ensemble], n: int, delta: float, d: int | None = None
) -> CompressionCheck:
    """Compress every consistent trial source with Upsilon built at the Jaynes entropy."""
    result = max_entropy_state(c, d)
    d = result.state.d
    s_j = min(max(result.entropy, 0.0), math.log2(d))
    trials = []
    for e in trial_ensembles:
        rho = density_of(e)
        if c.observables and np.max(c.residuals(rho.matrix)) > 1e-6:
            raise InconsistentTrial("trial source does not reproduce the measured means")
        trials.append(rho)
    ups = build_upsilon(d, n, s_j, delta)
    outcomes = []
    for e, rho in zip(trial_ensembles, trials):
        rep = universal_fidelity(e, ups)
        s = rho.entropy
        outcomes.append(TrialOutcome(s, s <= s_j + 1e-8, rep.mass, rep.avg_fidelity, rep.lower_bound, bool(rep.bound_holds)))
    return CompressionCheck(s_j, ups.dim, ups.rate, tuple(outcomes))
