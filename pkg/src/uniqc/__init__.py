"""Universal quantum information compression: typical subspaces, the method of
types, and the symmetric-subspace construction of Upsilon."""

__version__ = "0.1.0"

from .classical import (
    CKSet,
    Distribution,
    TypeClass,
    TypicalSet,
    ck_decode,
    ck_encode,
    ck_mass,
    ck_set,
    shannon_entropy,
    simulate_codec,
    type_of,
    typical_set,
)
from .jaynes import ConstraintSet, JaynesResult, jaynes_compression_check, max_entropy_state
from .numerics import SpanBuilder, apply_tensor_power, hermitian_eig, hermitian_exp, orthonormal_span
from .protocol import FidelityReport
from .qsource import DensityMatrix, Ensemble, density_of, sample_block, von_neumann_entropy
from .schumacher import project_typical, sj_fidelity_exact, sj_fidelity_mc, typical_subspace
from .universal import (
    UniversalSubspace,
    build_upsilon,
    contains_rotated_ck,
    random_unitary_span_rank,
    rate_curve,
    sym_dim,
    sym_operator_basis,
    universal_fidelity,
)
