"""Asymptotic-expansion calculus for the incompressible Euler equation.

Graded expansions ``chi(r) sum a_k^j(theta) (log r)^j / r^k`` over band-limited
sphere functions, the exact Laplacian and its resonance-aware inverse, the
pressure-free Euler right-hand side, and numeric oracles to cross-check them.
"""

from .compose import (
    AsymDiffeo,
    compose,
    conjugated_divergence,
    conjugated_gradient,
    conjugated_laplacian,
    jacobian_inverse,
)
from .errors import (
    AsymError,
    DimensionMismatch,
    MalformedSource,
    NotDivergenceFree,
    NotTwoDimensional,
    OrientationError,
    ResonantComponent,
    StencilOutOfDomain,
    StepUnstable,
    UnresolvedSupport,
    UnsupportedDimension,
)
from .euler import (
    ConservationReport,
    EulerRHS,
    build_hamiltonian_field,
    conservation_check,
    euler_rhs,
    example1,
    example2,
    nontrivial_integrals_d2,
    q_nonlinearity,
)
from .expansion import (
    AsymExpansion,
    Grade,
    SpaceSignature,
    VectorExpansion,
    add,
    check_membership,
    divergence,
    gradient,
    jacobian,
    laplacian,
    multiply_expansions,
    partial_derivative,
    scale,
)
from .io import ExpansionDocument
from .laplace import InversionResult, invert_laplacian_asym, mass_monopole, multipole_K
from .oracle import CompactField, FlowResult, eval_dense, fd_jacobian, fd_laplacian, integrate_flow, moment
from .sphere import (
    EigenSpec,
    SphereFn,
    helmholtz_solve,
    inner_product,
    laplace_beltrami,
    multiply,
    project_degree,
)

__version__ = "0.1.0"
