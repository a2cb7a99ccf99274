"""L1-norm principal component analysis: solvers, certification, evaluation.

Find an orthonormal frame Q maximizing the entrywise L1 norm of X^T Q with
proximal alternating schemes built on exact sign and Procrustes updates,
then certify the run: criticality residuals, potential decrease, error
bounds, and empirical gradient inequalities.
"""

from .data import FixedEffectSpec, gen_fixed_effect, read_sparse_labeled, write_trace
from .errors import (
    DegenerateUpdateError,
    DimensionMismatchError,
    DivergedError,
    InvalidInputError,
    ParseError,
    PreconditionError,
    UndefinedMetricError,
    UnsupportedRegimeError,
)
from .linalg import polar_factor, spectral_norm, stiefel_residual, thin_svd
from .metrics import choose_K_by_variance, kmeans_accuracy, tev
from .model import (
    ProblemInstance,
    objective_h,
    objective_l1,
    potential_psi,
    residual_R,
    sign_select,
    subgrad_dist_h,
    subgrad_dist_linear,
)
from .solvers import (
    IterateTrace,
    SolveResult,
    SolverConfig,
    draw_start,
    fpm_solve,
    gipalm_solve,
    ipalm_solve,
    pam_solve,
    pame_solve,
    pdcae_solve,
    run_comparison,
    solve,
    theorem_config,
)
from .verify import (
    AuditReport,
    CriticalityReport,
    CriticalSetSpec,
    build_critical_point,
    check_alpha_condition,
    convergence_fit,
    criticality_report,
    critical_set_separation_probe,
    critical_set_spec,
    decrease_and_error_audit,
    enumerate_oracle,
    error_bound_probe,
    kappa_constant,
    kl_ratio_probe,
    kl_ratio_probe_h,
    sample_critical_point,
    sandwich_probe,
)

__version__ = "0.1.0"

__all__ = [
    "AuditReport",
    "CriticalityReport",
    "CriticalSetSpec",
    "DegenerateUpdateError",
    "DimensionMismatchError",
    "DivergedError",
    "FixedEffectSpec",
    "InvalidInputError",
    "IterateTrace",
    "ParseError",
    "PreconditionError",
    "ProblemInstance",
    "SolveResult",
    "SolverConfig",
    "UndefinedMetricError",
    "UnsupportedRegimeError",
    "build_critical_point",
    "check_alpha_condition",
    "choose_K_by_variance",
    "convergence_fit",
    "criticality_report",
    "critical_set_separation_probe",
    "critical_set_spec",
    "decrease_and_error_audit",
    "draw_start",
    "enumerate_oracle",
    "error_bound_probe",
    "fpm_solve",
    "gen_fixed_effect",
    "gipalm_solve",
    "ipalm_solve",
    "kappa_constant",
    "kl_ratio_probe",
    "kl_ratio_probe_h",
    "kmeans_accuracy",
    "objective_h",
    "objective_l1",
    "pam_solve",
    "pame_solve",
    "pdcae_solve",
    "polar_factor",
    "potential_psi",
    "read_sparse_labeled",
    "residual_R",
    "run_comparison",
    "sample_critical_point",
    "sandwich_probe",
    "sign_select",
    "solve",
    "spectral_norm",
    "stiefel_residual",
    "subgrad_dist_h",
    "subgrad_dist_linear",
    "tev",
    "theorem_config",
    "thin_svd",
    "write_trace",
]
