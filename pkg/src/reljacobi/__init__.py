"""Noncanonical Poisson brackets for relativistic particles, with numerical Jacobi-identity checks."""

from ._kernels import BACKEND, NUMBA_AVAILABLE
from .brackets import (
    BRACKET_KINDS,
    BracketSpec,
    CurvedBracket,
    FlatEMBracket,
    MultiparticleBracket,
    Observable,
    PhasePoint,
    PolynomialBracket,
    VariableMassBracket,
    bracket_as_observable,
    build_bracket,
    coordinate_observable,
    eval_bracket,
    jacobi_residual,
)
from .dynamics import derive_eom, closed_form_accel, integrate, invariant_drift
from .errors import CapabilityError, DomainError, NumericError, ReljacobiError
from .fields import (
    fd_derivative_oracle,
    preset_field,
    preset_mass,
    preset_metric,
    preset_potential,
)
from .jacobi import (
    basis_jacobi_residual,
    closed_form_residual,
    curved_fourth_identity_split,
    maxwell_residual,
    quadratic_force_exclusion,
    verify_jacobi,
)
from .structure import (
    ChargeMatrix,
    MonopoleConfig,
    assemble_multiparticle,
    canonize_curved,
    canonize_flat,
    constrained_field_combinations,
    count_components_and_conditions,
    dual_tensor,
    total_field,
)
from .tensor_core import ETA, MetricValue, Tensor, contract, lower_index, raise_index

__version__ = "0.1.0"
