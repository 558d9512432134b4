"""Solitary-wave branches, bifurcations and spectral data for coupled
nonlinear Schrodinger equations.

The package combines closed-form mode/threshold formulas, a Gauss-Legendre
collocation BVP solver with projection boundary conditions, and
pseudo-arclength continuation into a toolkit that traces solitary-wave
families, locates their pitchfork and saddle-node bifurcations, follows
eigenvalue loci of the linearized operator, and computes the generalized
kernel data that explains why the fold does not switch stability.
"""
from .analytic import (
    BifCoefficients,
    EmbeddedEigenvalue,
    ModelParams,
    bif_coefficients,
    critical_coupling,
    embedded_eigenfunction_Psi,
    embedded_eigenvalues,
    essential_spectrum_gap,
    fundamental_profile,
    hyp2f1_terminating,
    kappa,
    kernel_mode_V1,
    onset_eigenvalues,
)
from .collocation import (
    BvpSystemSpec,
    CollocationSolution,
    IntegralCondition,
    Mesh,
    NewtonSettings,
    assemble_residual,
    integral_functional,
    interpolate,
    remesh,
    solve_newton,
)
from .continuation import (
    Branch,
    BranchPoint,
    ContinuationSettings,
    SpecialPoint,
    branch_switch_seed,
    continue_branch,
    correct_branch_seed,
    detect_fold,
    tangent,
)
from .errors import (
    ConvergenceError,
    DegenerateProjectionError,
    QuadratureError,
    SingularJacobianError,
    StallError,
)
from .scenarios import (
    ProtocolResult,
    ScenarioConfig,
    compute_bifurcated_branch,
    compute_eigen_path,
    compute_fundamental_branch,
    run_asymptotics,
    run_diagram,
    run_eigenloci,
    run_geneig,
    run_protocol,
)
from .systems import (
    CnlsParams,
    EigenSystem,
    GenEigSystem,
    HomoclinicSystem,
    ProjectionMatrices,
    fredholm_integrals,
)

__version__ = "0.1.0"
