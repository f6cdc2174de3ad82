"""Spectral laboratory for a Dirac operator twisted by a line bundle ramified along a circle.

The flat model is the branching circle times the unit disk.  Separation of
variables reduces the operator to two-component radial problems, one per mode
(lam, mu); the lam = -1/2 modes carry the r^{-1/2} residues on which residue
conditions act.
"""

__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .model_config import (  # noqa: E402
    ModeIndex,
    ModelConfig,
    OuterBoundaryCondition,
    base_spectrum,
    conjugate_mode,
    enumerate_modes,
    outer_custom,
    outer_type1,
    outer_type2,
    validate_config,
)
from .radial import (  # noqa: E402
    RadialSection,
    apply_mode_operator,
    fd_eigen_oracle,
    fundamental_system,
    inhomogeneous_solve,
    leading_coefficient,
)
from .gelfand_robbin import (  # noqa: E402
    BranchingOperator,
    ResidueVector,
    check_norm,
    extend,
    greens_form_quadrature,
    greens_form_residue,
    residue,
    sobolev_norm,
)
from .conditions import (  # noqa: E402
    ChiralityOperator,
    ResidueCondition,
    chiral_branching_index,
    chirality_split,
    complete_plus,
    fredholm_delta_index,
    is_lagrangian,
    make_aps,
    make_bag,
    make_custom,
    make_local,
    make_maximal,
    make_minimal,
    symbol_regularity_check,
    symplectic_complement,
)
from .spectral import (  # noqa: E402
    SpectrumResult,
    assemble_spectrum,
    calderon_condition,
    calderon_family,
    counting_function,
    eigenfunction,
    eigenvalues_in_window,
    graded_spectra,
    heat_supertrace,
    mode_matching_determinant,
    second_order_solve,
)
from .diagnostics import (  # noqa: E402
    adapted_norm,
    build_battery,
    elliptic_ratio,
    hardy_verify,
    norm_equivalence_sweep,
    res_ext_uniformity_sweep,
    untwist_coefficients,
    weyl_check,
)
