import itertools
import math
from functools import reduce

import numpy as np
import pytest

from uniqc.classical import typical_set
from uniqc.errors import DimensionMismatch
from uniqc.numerics import haar_unitary, random_state_vector
from uniqc.qsource import DensityMatrix, Ensemble, density_of
from uniqc.schumacher import project_typical, sj_fidelity_exact, sj_fidelity_mc, typical_subspace

from conftest import qubit

# weakly typical mass of the 0.9/0.1 source at delta = 0.25, from full enumeration
REFERENCE_MASSES = {4: 0.0, 6: 0.354294, 8: 0.38263752, 10: 0.387420489}


def dense_projector(ts):
    v = reduce(np.kron, [ts.source.eigenvectors] * ts.n)
    return (v[:, ts.mask]) @ v[:, ts.mask].conj().T


def dense_fidelity(e, ts):
    """Brute-force average of <psi| rho_out |psi> over every block."""
    pi = dense_projector(ts)
    sub = ts.substitute_state()
    total = []
    for labels in itertools.product(range(len(e)), repeat=ts.n):
        p = math.prod(e.probs[j] for j in labels)
        if p == 0:
            continue
        psi = reduce(np.kron, [e.vectors[j] for j in labels])
        w = pi @ psi
        q = np.vdot(w, w).real
        rho_out = np.outer(w, w.conj()) + (1 - q) * np.outer(sub, sub.conj())
        total.append(p * np.vdot(psi, rho_out @ psi).real)
    return math.fsum(total)


def test_typical_subspace_basic():
    rho = DensityMatrix(np.diag([0.9, 0.1]))
    ts = typical_subspace(rho, 8, 0.25)
    assert ts.dim == 8
    assert all(seq.indices.count(1) == 1 for seq in ts.member_sequences)
    assert ts.mass == pytest.approx(8 * 0.9**7 * 0.1, abs=1e-12)
    assert ts.rate == pytest.approx(3 / 8)


def test_typical_projector_is_a_projector(rng):
    u = haar_unitary(2, rng)
    rho = DensityMatrix(u @ np.diag([0.8, 0.2]) @ u.conj().T)
    ts = typical_subspace(rho, 5, 0.3)
    pi = dense_projector(ts)
    assert np.allclose(pi @ pi, pi, atol=1e-12)
    assert np.trace(pi).real == pytest.approx(ts.dim)
    rho_n = reduce(np.kron, [rho.matrix] * 5)
    assert np.trace(rho_n @ pi).real == pytest.approx(ts.mass, abs=1e-12)


def test_project_typical_matches_dense(rng):
    u = haar_unitary(2, rng)
    rho = DensityMatrix(u @ np.diag([0.85, 0.15]) @ u.conj().T)
    ts = typical_subspace(rho, 4, 0.4)
    pi = dense_projector(ts)
    psi = random_state_vector(16, rng)
    q, out = project_typical(ts, psi)
    assert q == pytest.approx(np.linalg.norm(pi @ psi) ** 2, abs=1e-12)
    assert np.allclose(out, pi @ psi / math.sqrt(q), atol=1e-12)
    with pytest.raises(DimensionMismatch):
        project_typical(ts, np.ones(8) / math.sqrt(8))


def test_project_typical_substitutes_on_empty_overlap():
    rho = DensityMatrix(np.diag([0.9, 0.1]))
    ts = typical_subspace(rho, 4, 0.2)
    psi = np.zeros(16)
    psi[0] = 1
    q, out = project_typical(ts, psi)
    assert q == 0.0
    assert np.allclose(out, ts.substitute_state())


def test_reference_masses_non_decreasing():
    rho = DensityMatrix(np.diag([0.9, 0.1]))
    masses = [typical_subspace(rho, n, 0.25).mass for n in sorted(REFERENCE_MASSES)]
    assert masses == pytest.approx([REFERENCE_MASSES[n] for n in sorted(REFERENCE_MASSES)], abs=1e-8)
    assert all(b >= a - 1e-10 for a, b in zip(masses, masses[1:]))


def test_mass_agrees_with_classical_typical_set(rng):
    # commuting case: the quantum mass is the classical typical mass of the spectrum
    u = haar_unitary(2, rng)
    rho = DensityMatrix(u @ np.diag([0.9, 0.1]) @ u.conj().T)
    for n in (12, 16, 22):
        assert typical_subspace(rho, n, 0.25).mass == pytest.approx(typical_set([0.9, 0.1], n, 0.25, explicit=False).mass, abs=1e-10)
    assert typical_subspace(rho, 22, 0.25).mass > 0.7


@pytest.mark.parametrize("seed", range(4))
def test_exact_fidelity_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    k = 3
    e = Ensemble.pure(rng.dirichlet(np.ones(k)), [random_state_vector(2, rng) for _ in range(k)])
    n = 4
    rep = sj_fidelity_exact(e, n, 0.3)
    ts = typical_subspace(density_of(e), n, 0.3)
    assert rep.avg_fidelity == pytest.approx(dense_fidelity(e, ts), abs=1e-12)
    assert rep.bound_holds


def test_nonorthogonal_ensemble_bound():
    e = Ensemble.pure([0.5, 0.5], [qubit(0.3), qubit(-0.3)])
    for n in (4, 6, 8):
        rep = sj_fidelity_exact(e, n, 0.2)
        assert rep.avg_fidelity >= rep.lower_bound - 1e-10
        assert rep.rate_qubits_per_signal <= density_of(e).entropy + 0.2 + 1e-12 or rep.dim == 0


def test_monte_carlo_agrees_with_exact():
    e = Ensemble.pure([0.7, 0.3], [qubit(0.4), qubit(2.0, 0.5)])
    exact = sj_fidelity_exact(e, 6, 0.2)
    mc = sj_fidelity_mc(e, 6, 0.2, samples=20000, seed=3)
    assert abs(mc.avg_fidelity - exact.avg_fidelity) <= 4 * mc.stderr
    again = sj_fidelity_mc(e, 6, 0.2, samples=20000, seed=3)
    assert again.avg_fidelity == mc.avg_fidelity
    assert mc.bound_holds
    with pytest.raises(ValueError):
        sj_fidelity_mc(e, 6, 0.2, samples=10, seed=3)


def test_mixed_signals_are_unraveled():
    e = Ensemble([1.0], [np.eye(2) / 2])
    rep = sj_fidelity_exact(e, 4, 2.0)
    assert rep.mass == pytest.approx(1.0)
    assert rep.avg_fidelity == pytest.approx(1.0)
    mc = sj_fidelity_mc(e, 4, 2.0, samples=200, seed=0)
    assert mc.avg_fidelity == pytest.approx(1.0)
    overlap = sj_fidelity_mc(e, 4, 2.0, samples=200, seed=0, mixed_metric="overlap")
    assert overlap.metric == "overlap" and overlap.bound_holds is None
    assert overlap.avg_fidelity == pytest.approx(1 / 16)
