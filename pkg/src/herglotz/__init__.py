"""Symbolic-numeric engine for higher-order contact (Herglotz) mechanics.

Given a contact Lagrangian L(q, q', ..., q^(k), z) this package derives
the dissipative higher-order Euler-Lagrange (Herglotz) equations, the
generalized momenta, energy, contact forms and Reeb field, the
Legendre map and contact Hamilton equations, and runs the unified
(Lagrangian-Hamiltonian) constraint algorithm; it also integrates the
dynamics numerically and cross-checks every derivation along two
independent routes.
"""

__version__ = "0.1.0"

from . import expr
from .dynamics import (
    RK4,
    RK45,
    CurveSpec,
    Trajectory,
    action,
    admissible_variations,
    integrate,
    sigma_factor,
    variational_check,
)
from .errors import (
    DomainError,
    HerglotzError,
    ModelError,
    NotInvertible,
    SingularLagrangian,
    StepFailure,
)
from .hamiltonian import (
    HamiltonianSystem,
    LegendreMap,
    hamiltonian,
    hamiltonian_system,
    hamiltonian_vector_field,
    legendre,
)
from .lagrangian import (
    ContactForms,
    energy,
    forms,
    herglotz_equations,
    lagrangian_vector_field,
    momenta,
    reeb_energy_rate,
    reeb_field,
    total_derivative,
    tulczyjew_dT,
)
from .model import (
    ContactLagrangian,
    RegularityReport,
    bundled_model_names,
    classify,
    hamiltonian_coords,
    lagrangian_coords,
    load_model,
    unified_coords,
)
from .report import (
    chain_report,
    check_report,
    derivation_report,
    render_chain,
    render_checks,
    render_derivation,
    to_json,
)
from .unified import (
    ChainStatus,
    ConstraintChain,
    Mode,
    build_unified,
    constraint_algorithm,
    project_to_hamiltonian,
    project_to_lagrangian,
)
from .verify import (
    CheckReport,
    check_contact,
    check_dissipation,
    check_equivalence,
    run_all,
)

__all__ = [
    "__version__",
    "expr",
    # model
    "ContactLagrangian",
    "RegularityReport",
    "classify",
    "load_model",
    "bundled_model_names",
    "lagrangian_coords",
    "hamiltonian_coords",
    "unified_coords",
    # lagrangian side
    "total_derivative",
    "tulczyjew_dT",
    "momenta",
    "energy",
    "herglotz_equations",
    "ContactForms",
    "forms",
    "reeb_field",
    "reeb_energy_rate",
    "lagrangian_vector_field",
    # hamiltonian side
    "LegendreMap",
    "legendre",
    "hamiltonian",
    "HamiltonianSystem",
    "hamiltonian_system",
    "hamiltonian_vector_field",
    # unified formalism
    "Mode",
    "ChainStatus",
    "ConstraintChain",
    "build_unified",
    "constraint_algorithm",
    "project_to_lagrangian",
    "project_to_hamiltonian",
    # numerics
    "Trajectory",
    "RK4",
    "RK45",
    "integrate",
    "CurveSpec",
    "action",
    "sigma_factor",
    "admissible_variations",
    "variational_check",
    # verification
    "CheckReport",
    "check_contact",
    "check_dissipation",
    "check_equivalence",
    "run_all",
    # reports
    "derivation_report",
    "render_derivation",
    "chain_report",
    "render_chain",
    "check_report",
    "render_checks",
    "to_json",
    # errors
    "HerglotzError",
    "DomainError",
    "ModelError",
    "SingularLagrangian",
    "NotInvertible",
    "StepFailure",
]
