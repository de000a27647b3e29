import math

import numpy as np
import pytest

from uniqc.errors import EnumerationTooLarge, InvalidState, MixedSignalsNeedDensityForm, NotHermitian
from uniqc.numerics import haar_unitary, random_state_vector
from uniqc.qsource import (
    DensityMatrix,
    Ensemble,
    density_of,
    eigen_sequences,
    product_eigenvalues,
    sample_block,
    von_neumann_entropy,
)


def test_density_matrix_validation():
    with pytest.raises(InvalidState):
        DensityMatrix(np.eye(2))
    with pytest.raises(NotHermitian):
        DensityMatrix([[0.5, 0.1], [0.2, 0.5]])
    with pytest.raises(InvalidState):
        DensityMatrix(np.diag([1.5, -0.5]))
    rho = DensityMatrix(np.diag([1 + 1e-12, -1e-12]))
    assert rho.eigenvalues.min() == 0.0
    with pytest.raises(AttributeError):
        rho.matrix = np.eye(2)
    with pytest.raises(ValueError):
        rho.matrix[0, 0] = 3


def test_entropy_values(rng):
    assert von_neumann_entropy(DensityMatrix(np.eye(4) / 4)) == pytest.approx(2.0)
    assert DensityMatrix.pure(random_state_vector(3, rng)).entropy == pytest.approx(0.0, abs=1e-9)
    u = haar_unitary(3, rng)
    rho = DensityMatrix(u @ np.diag([0.5, 0.3, 0.2]) @ u.conj().T)
    assert rho.entropy == pytest.approx(-sum(x * math.log2(x) for x in (0.5, 0.3, 0.2)), abs=1e-10)


def test_ensemble_density_and_entropy_bound(rng):
    for _ in range(20):
        k = rng.integers(2, 5)
        p = rng.dirichlet(np.ones(k))
        e = Ensemble.pure(p, [random_state_vector(2, rng) for _ in range(k)])
        rho = density_of(e)
        dense = sum(q * np.outer(v, v.conj()) for q, v in zip(p, e.vectors))
        assert np.allclose(rho.matrix, dense)
        h = -sum(q * math.log2(q) for q in p)
        assert rho.entropy <= h + 1e-9


def test_unravel_preserves_density(rng):
    u = haar_unitary(2, rng)
    mixed = u @ np.diag([0.7, 0.3]) @ u.conj().T
    e = Ensemble([0.4, 0.6], [np.array([1, 0]), mixed])
    assert not e.is_pure
    with pytest.raises(MixedSignalsNeedDensityForm):
        e.signal_matrix()
    un = e.unravel()
    assert un.is_pure and len(un) == 3
    assert np.allclose(density_of(un).matrix, density_of(e).matrix)


def test_ensemble_rejects_bad_input():
    with pytest.raises(ValueError):
        Ensemble([0.5, 0.6], [[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        Ensemble([0.5, 0.5], [[1, 0], [0, 1, 0]])
    with pytest.raises(InvalidState):
        Ensemble([1.0], [[1, 1]])


def test_sample_block_is_seeded_kron(rng):
    e = Ensemble.pure([0.5, 0.5], [[1, 0], [1 / math.sqrt(2), 1 / math.sqrt(2)]])
    a = sample_block(e, 4, seed=11)
    b = sample_block(e, 4, seed=11)
    assert a.labels == b.labels and np.array_equal(a.state, b.state)
    assert a.state.shape == (16,)
    assert np.linalg.norm(a.state) == pytest.approx(1)
    dens = sample_block(e, 3, seed=11, form="density")
    assert dens.state.shape == (8, 8)
    mixed = Ensemble([1.0], [np.eye(2) / 2])
    with pytest.raises(MixedSignalsNeedDensityForm):
        sample_block(mixed, 2, seed=0, form="vector")


def test_product_eigenvalues_match_kron():
    lam = np.array([0.6, 0.3, 0.1, 0.0])
    vals = product_eigenvalues(lam, 3)
    dense = np.kron(np.kron(lam, lam), lam)
    assert np.allclose(vals, dense, atol=1e-15)
    assert math.fsum(vals) == pytest.approx(1.0)


def test_eigen_sequences_and_cap():
    rho = DensityMatrix(np.diag([0.75, 0.25]))
    seqs = list(eigen_sequences(rho, 3))
    assert len(seqs) == 8
    assert seqs[0].indices == (0, 0, 0) and seqs[0].value == pytest.approx(0.75**3)
    assert seqs[5].indices == (1, 0, 1)
    with pytest.raises(EnumerationTooLarge):
        list(eigen_sequences(rho, 30))
