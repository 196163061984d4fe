"""Phase-space kinetic simulator with entropy-dissipation diagnostics,
decay-rate certificates and a numerical verifier for the underlying
differential identities."""

__version__ = "0.1.0"

from .certificate import (
    CertificateParams,
    ConstantEstimate,
    FeasibilityReport,
    estimate_functional_constant,
    optimize_rate,
    paper_constants_bgk,
    paper_constants_bgk_p,
    paper_constants_fp,
)
from .functionals import (
    BOLTZMANN,
    FunctionalReport,
    PIndex,
    build_report,
    correction_terms,
    correction_weight,
    entropy,
    fisher_components,
    fp_dissipation_terms,
    projected_entropy,
    projected_entropy_rate,
    projected_quantities,
)
from .initial import (
    cosine,
    equilibrium,
    random_band_limited,
    velocity_perturbation,
)
from .integrator import (
    Schedule,
    SimulationError,
    Trajectory,
    load_trajectory,
    save_trajectory,
    simulate,
    strang_step,
)
from .operators import (
    BGK,
    CollisionKind,
    FokkerPlanck,
    Transport,
    bgk_flow,
    fokker_planck_flow,
    transport_flow,
)
from .phase_space import (
    Grid,
    GridSpec,
    PositivityError,
    SpectralResolutionWarning,
    State,
    build_grid,
    grad_v,
    grad_x,
    integrate_mu,
    load_state,
    project_pi,
    save_state,
)
from .verifier import (
    DecayFit,
    LemmaCheckResult,
    check_lemma_table,
    check_mixed_term,
    check_projection_inequalities,
    check_transport_polynomial,
    fit_decay,
    random_state,
    run_suite,
    semigroup_derivative,
)
