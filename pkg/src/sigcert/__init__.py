"""Conditional SAGE certificates and lower-bound hierarchies for signomials.

Certify nonnegativity of ``sum_j c_j exp(A_j . x)`` over a convex set via
relative-entropy (exponential-cone) programs, and compute the convergent
hierarchy of lower bounds for constrained signomial minimization, with
machine-checkable certificates.
"""

from .conic import (
    Aff,
    BackendFailure,
    ClarabelBackend,
    ConicProgram,
    ScsBackend,
    SolveResult,
    SolverBackend,
    SolverOptions,
    add_relative_entropy_epigraph,
    default_backend,
)
from .convexset import (
    Ball,
    Box,
    ConvexSet,
    EmptySetError,
    FullSpace,
    Intersection,
    Polyhedron,
    SamplingFailureError,
    UnboundedSetError,
    bounding_box,
    contains,
    sample_points,
    set_from_json_dict,
    set_to_json_dict,
    support_epigraph,
    support_value,
)
from .relax import (
    BoundResult,
    MonotonicityError,
    grid_oracle,
    hierarchy_scan,
    sage_bound,
)
from .sage import (
    AgeBlock,
    AgeWitness,
    SageCertificate,
    StructuralMismatchError,
    VerificationReport,
    age_membership,
    presolve_indices,
    relative_entropy,
    sage_membership,
    verify_certificate,
)
from .signomial import (
    ExponentLattice,
    InputError,
    Signomial,
    ensure_constant_term,
    exponent_lattice,
    modulation_matrix,
)

__version__ = "0.1.0"

__all__ = [
    "Aff",
    "AgeBlock",
    "AgeWitness",
    "BackendFailure",
    "Ball",
    "BoundResult",
    "Box",
    "ClarabelBackend",
    "ConicProgram",
    "ConvexSet",
    "EmptySetError",
    "ExponentLattice",
    "FullSpace",
    "InputError",
    "Intersection",
    "MonotonicityError",
    "Polyhedron",
    "SageCertificate",
    "SamplingFailureError",
    "ScsBackend",
    "Signomial",
    "SolveResult",
    "SolverBackend",
    "SolverOptions",
    "StructuralMismatchError",
    "UnboundedSetError",
    "VerificationReport",
    "add_relative_entropy_epigraph",
    "age_membership",
    "bounding_box",
    "contains",
    "default_backend",
    "ensure_constant_term",
    "exponent_lattice",
    "grid_oracle",
    "hierarchy_scan",
    "modulation_matrix",
    "presolve_indices",
    "relative_entropy",
    "sage_bound",
    "sage_membership",
    "sample_points",
    "set_from_json_dict",
    "set_to_json_dict",
    "support_epigraph",
    "support_value",
    "verify_certificate",
]
