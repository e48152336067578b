"""Covariance-domain optimization for the two-operator C-RAN downlink with
spectrum pooling, fronthaul/backhaul compression and inter-operator privacy
constraints, plus a Monte-Carlo reproduction harness."""

from .errors import (
    ConfigError,
    DimensionError,
    InitializationError,
    SingularMatrixError,
    SubproblemError,
    UnsupportedModeError,
)
from .model import (
    ChannelRealization,
    NetworkConfig,
    load_channels,
    path_loss,
    sample_channels,
    sample_positions,
    save_channels,
    selection_matrix,
)
from .metrics import (
    MODE_MULTIVARIATE,
    MODE_P2P,
    PRIVATE,
    SHARED,
    ConstraintReport,
    DesignPoint,
    backhaul_rate,
    evaluate_constraints,
    fronthaul_rate,
    multivariate_joint_rate,
    phi_logdet,
    power_per_hz,
    privacy_leakage,
    rate_private,
    rate_shared,
)
from .dcp import (
    ConvexSubproblem,
    ExpansionPoint,
    SCHEME_EQUAL,
    SCHEME_NO_POOLING,
    SCHEME_OPTIMIZED,
    build_subproblem,
    hat_backhaul,
    hat_fronthaul,
    hat_privacy,
    hat_rate_private,
    hat_rate_shared,
    matrix_phi,
    scalar_phi,
)
from .conic import ClarabelBackend
from .solver import (
    CccpOptions,
    CvxpyBackend,
    Solution,
    cccp,
    default_backend,
    initialize_feasible,
    rank_project,
    solve_subproblem,
)
from .experiments import (
    Aggregate,
    SweepSpec,
    TrialRecord,
    emit_plot_data,
    load_config,
    read_csv,
    run_sweep,
    run_trial,
    secrecy_rate,
    write_csv,
)

__version__ = "0.1.0"
