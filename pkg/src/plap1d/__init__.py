"""Certified positive solutions of 1D p-Laplacian problems with indefinite weight."""

from .core_types import (
    DEFAULT_N,
    AssemblyPlan,
    BracketError,
    CertificateError,
    EigenError,
    EpsTooLargeError,
    GlueError,
    Grid,
    GridFunction,
    Interval,
    NoEigenvalueError,
    NoSupersolutionError,
    SolverError,
    TauTooLargeError,
    Problem,
    Weight,
    cumulative_negative_left,
    cumulative_negative_right,
    integrate,
    p_conjugate,
    phi_p,
    sin_power_weight,
    step_weight,
)
from .bvp import residual_g, solve_g
from .eigen import EigenPair, normalize_sup, principal_eigenvalue, shoot
from .conditions import (
    CONDITION_NAMES,
    ConditionReport,
    TauInterval,
    c_pq,
    check_all,
    check_cor,
    check_thm1_i,
    check_thm1_ii,
    check_thm2_i,
    check_thm2_ii,
    default_eps,
    feasible_tau,
    gamma,
    m_script,
    tau_interval,
)
from .subsuper import (
    SUBSOLUTION_THEOREMS,
    Certificate,
    build_subsolution,
    build_supersolution,
    build_u1_exp,
    build_u1_linear,
    build_u1_power,
    build_u1_sinh,
    build_u3_exp,
    build_u3_linear,
    build_u3_power,
    build_u3_sinh,
    enforce_ordering,
    glue,
    rescale_certificate,
)
from .verify import (
    PositivityReport,
    WeakFormReport,
    check_weak_subsolution,
    check_weak_supersolution,
    default_certificate_tol,
    positivity_profile,
    solution_residual,
    weak_form_values,
)
from .solver import (
    SolutionReport,
    energy,
    solve_between,
    solve_full,
    sweep,
)

__version__ = "0.1.0"
