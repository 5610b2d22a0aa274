"""Certificate synthesis and empirical validation of annular stability
for generalized Persidskii systems, including the recurrent-network front
end."""

from .certify import (
    Certificate,
    CheckReport,
    InadmissibleInput,
    NoCertificate,
    SearchConfig,
    certificate_from_dict,
    certificate_to_dict,
    certify,
    check_certificate,
)
from .lmi import (
    ConicProblem,
    CvxpyEngine,
    DecisionVars,
    Feasible,
    GammaCondition,
    Infeasible,
    MockEngine,
    SolverFailure,
    VarTemplate,
    assemble_Q,
    beta_branch_constraints,
    gamma_condition,
    solve_feasibility,
    sup_exp_bound,
    write_sdpa,
)
from .lyapunov import (
    ClassKBound,
    LyapunovParams,
    NoCertifiedBoundError,
    alpha_lower,
    alpha_upper,
    eval_V,
    finsler_positive,
)
from .model import (
    NonlinearityFamily,
    PersidskiiSystem,
    SectorIntegralBounds,
    StabilityQuery,
    ValidationReport,
    bipolar_sigmoid_family,
    classify_nonlinearities,
    cubic_family,
    odd_poly_family,
    relu_family,
    reorder_blocks,
    system_from_dict,
    system_to_dict,
    tanh_family,
    validate_system,
)
from .rnn import (
    Ctrnn,
    augment_bias,
    bipolar_sigmoid_bounds,
    ctrnn_to_persidskii,
    load_checkpoint,
    tanh_bounds,
)
from .simulate import (
    FalsificationReport,
    InputSignal,
    IntegrationError,
    Trajectory,
    Verdict,
    constant_input,
    falsify,
    integrate,
    monitor_annulus,
    piecewise_constant_input,
    sinusoid_input,
    table_input,
    trajectory_to_csv,
    vdot_identity_residual,
    zero_input,
)

__version__ = "0.1.0"
