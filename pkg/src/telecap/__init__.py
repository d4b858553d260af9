"""Controlled-teleportation capability of multipartite qudit states.

Exact separability thresholds, fully entangled fraction solvers, a pair
optimiser over controller measurement bases, state constructors and
independent numerical oracles.
"""

__version__ = "0.1.0"

from .config import DEFAULT_TOLERANCES, DimensionError, Tolerances
from .ctel import (
    CtelOptions,
    CtelResult,
    UsefulnessReport,
    ctel_fraction,
    ctel_fraction_fixed_basis,
    min_pair_fidelity,
    usefulness_report,
)
from .factory import (
    ExtremalStateSpec,
    extremal_ksep_state,
    ghz,
    isotropic_ghz,
    phi_mt,
    random_biseparable_pure,
    random_ksep_mixture,
    random_sep_pk_pure,
)
from .fef import FefOptions, FefResult, Method, fidelity_from_fraction, fully_entangled_fraction
from .qstate import DensityMatrix, Ket, SystemLayout, partial_trace, read_state, write_state
from .thresholds import Partition, threshold_T, threshold_Te, threshold_Te_limit
