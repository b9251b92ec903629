"""Dirac brackets for reducible second-class constraint systems."""

from .chain import (
    ChainProfile,
    DofReport,
    ReducibleSystem,
    Tolerances,
    ValidationReport,
    dof_report,
    generate_random_chain,
    surface_points,
    system_from_json,
    system_to_json,
    tangent_complement_generators,
    validate,
)
from .dirac import (
    DiracStructure,
    Trajectory,
    build_c,
    build_mu,
    build_structure,
    dirac_bracket_at,
    dirac_bracket_function,
    evolve,
    fundamental_brackets,
    solve_m,
)
from .errors import (
    ChainGenerationError,
    DiracForgeError,
    LadderError,
    MuConstructionError,
    NotSecondClassError,
    ParityError,
    RecoveryError,
    StructuralError,
    SurfaceSampleError,
)
from .irreducible import (
    CertificateReport,
    ExtendedPhaseSpace,
    IrreducibleSystem,
    build_c_delta,
    build_c_delta_inverse,
    build_extended_space,
    build_irreducible,
    certify_equivalence,
    irreducible_dirac_at,
    irreducible_fundamental_brackets,
    to_plain_system,
)
from .pform import PFormSpec, build_pform_system, expected_counts, reference_brackets
from .phasespace import (
    PhaseSpace,
    PolyFunction,
    gradient,
    poisson_bracket,
    sample_surface_point,
)
from .projectors import ProjectorLadder, build_ladder, verify_ladder

__version__ = "0.1.0"
