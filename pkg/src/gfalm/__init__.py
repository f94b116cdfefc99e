"""Action ground states of the focusing nonlinear Schrödinger equation.

The solver minimizes the quadratic energy Q on the unit L^{p+1} sphere with
a normalized gradient flow whose Lagrange multiplier is frozen per step
(``solver.run``), verifies the supporting theory numerically (energy decay
certificates, coercivity, Lojasiewicz quotients, quadratic growth — see
``geometry`` and ``acceptance``), and cross-checks against the continuous
flow (``flow``).  ``cli`` exposes all of it as the ``gfalm`` command.
"""

from .config import (
    CONFIG_SCHEMA,
    ConfigSchemaError,
    RunSetup,
    config_hash,
    load_config,
    parse_config,
)
from .fieldio import FieldIOError, read_field, write_field
from .fitting import FitError, RateFit, fit_log_decay
from .flow import FlowConfig, FlowRecord, decay_rate_estimate, flow_rhs, rk4_integrate
from .functionals import (
    ActionValues,
    EigensolverError,
    FunctionalError,
    OmegaCheck,
    PotentialSpec,
    ProblemParams,
    Q,
    action_functionals,
    alpha_min,
    apply_A,
    check_omega,
    coercivity_constant,
    constraint_G,
    lambda_exact,
    lambda_tilde,
    modulus_power,
    rescale_to_phi,
    residual_mu,
)
from .geometry import (
    ChartCoords,
    ChartError,
    CoercivityResult,
    GeometryError,
    GroundStateContext,
    GrowthProbeResult,
    TangentField,
    apply_hessian,
    apply_L,
    chart,
    chart_inverse,
    coercivity_check,
    lojasiewicz_quotient,
    quadratic_growth_probe,
    sample_tangent,
    solve_r_of_xi,
    tangent_project,
)
from .grid import (
    FieldNorms,
    GridError,
    GridField,
    GridSpec,
    align_phase,
    apply_dxx,
    dxx_symbol,
    inner,
    norm_h1,
    norm_hminus1,
    norm_l2,
    norm_linf,
    norm_lp,
    normalize_lp,
    norms,
    resolvent_solve,
    seminorm_fwd_diff,
    seminorm_h1,
)
from .reference import (
    InitialDataSpec,
    Reference2D,
    ReferenceError,
    exact_soliton,
    load_reference_2d,
    make_initial,
    make_reference_2d,
    soliton_l4_norm,
)
from .solver import (
    ConfigError,
    IterationRecord,
    SolveOutcome,
    SolverConfig,
    SolverError,
    StepResult,
    decay_certificate,
    gfalm_step,
    resolve_alpha,
    run,
)

__version__ = "0.1.0"

__all__ = [
    "ActionValues",
    "ChartCoords",
    "ChartError",
    "CoercivityResult",
    "CONFIG_SCHEMA",
    "ConfigError",
    "ConfigSchemaError",
    "EigensolverError",
    "FieldIOError",
    "FieldNorms",
    "FitError",
    "FlowConfig",
    "FlowRecord",
    "FunctionalError",
    "GeometryError",
    "GridError",
    "GridField",
    "GridSpec",
    "GroundStateContext",
    "GrowthProbeResult",
    "InitialDataSpec",
    "IterationRecord",
    "OmegaCheck",
    "PotentialSpec",
    "ProblemParams",
    "Q",
    "RateFit",
    "Reference2D",
    "ReferenceError",
    "RunSetup",
    "SolveOutcome",
    "SolverConfig",
    "SolverError",
    "StepResult",
    "TangentField",
    "action_functionals",
    "align_phase",
    "alpha_min",
    "apply_A",
    "apply_dxx",
    "apply_hessian",
    "apply_L",
    "chart",
    "chart_inverse",
    "check_omega",
    "coercivity_check",
    "coercivity_constant",
    "config_hash",
    "constraint_G",
    "decay_certificate",
    "decay_rate_estimate",
    "dxx_symbol",
    "exact_soliton",
    "fit_log_decay",
    "flow_rhs",
    "gfalm_step",
    "inner",
    "lambda_exact",
    "lambda_tilde",
    "load_config",
    "load_reference_2d",
    "lojasiewicz_quotient",
    "make_initial",
    "make_reference_2d",
    "modulus_power",
    "norm_h1",
    "norm_hminus1",
    "norm_l2",
    "norm_linf",
    "norm_lp",
    "normalize_lp",
    "norms",
    "parse_config",
    "quadratic_growth_probe",
    "read_field",
    "rescale_to_phi",
    "residual_mu",
    "resolve_alpha",
    "resolvent_solve",
    "rk4_integrate",
    "run",
    "sample_tangent",
    "seminorm_fwd_diff",
    "seminorm_h1",
    "solve_r_of_xi",
    "soliton_l4_norm",
    "tangent_project",
    "write_field",
    "__version__",
]
