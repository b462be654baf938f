"""Linear precoder design for finite-alphabet multiple access channels.

The package models a K-user uplink in which every transmitter uses a
discrete symbol alphabet and only the channel statistics (a Weichselberger
eigenmode coupling model) are known at the design stage.  A deterministic
large-system description replaces Monte-Carlo averaging over channels,
which makes the weighted sum rate and its gradient cheap enough to drive
projected gradient ascent over the precoding matrices.
"""

from .channel import (
    PrecoderSet,
    UserOrdering,
    UserStatistics,
    correlation_matrices,
    coupling_matrix,
    sample_channel,
    snr_to_power,
    sort_users,
)
from .constellation import (
    Constellation,
    VectorAlphabet,
    build_constellation,
    search_space_size,
    vector_alphabet,
)
from .equivalent import (
    EquivalentChannel,
    MmseResult,
    finite_alphabet_mi,
    mi_from_points,
    mi_from_pool,
    mmse_estimate,
    mse_matrix,
    mse_matrix_from_pool,
    sqrt_T,
    tx_gram,
)
from .errors import (
    ConfigurationError,
    MacPrecodeError,
    ParseError,
    SizeLimitError,
    ValidationError,
)
from .fixed_point import (
    FixedPointState,
    MacSystem,
    SolveOptions,
    WsrResult,
    asymptotic_conditional_mi,
    solve_fixed_point,
    wsr_objective,
)
from .gradient import (
    GradientWorkspace,
    build_workspace,
    commutation_matrix,
    theta_terms,
    wsr_gradient,
    xi_matrix,
)
from .harness import (
    ExperimentConfig,
    McMiResult,
    OracleConfig,
    SweepRow,
    config_from_dict,
    load_config,
    load_precoders,
    mc_exact_mi,
    read_sweep_csv,
    run_sweep,
    save_precoders,
    table_counts,
)
from .optimizer import (
    IterationRecord,
    OptimizerConfig,
    OptimizerTrace,
    StartRecord,
    backtrack_update,
    baseline_np,
    optimize,
    project_power,
)
from .sampling import complex_normal, derive_seed, derived_int, noise_pool, rng_for

__version__ = "0.1.0"

__all__ = [
    "Constellation",
    "VectorAlphabet",
    "build_constellation",
    "vector_alphabet",
    "search_space_size",
    "UserStatistics",
    "PrecoderSet",
    "UserOrdering",
    "sort_users",
    "coupling_matrix",
    "correlation_matrices",
    "sample_channel",
    "snr_to_power",
    "EquivalentChannel",
    "MmseResult",
    "sqrt_T",
    "tx_gram",
    "mmse_estimate",
    "mse_matrix",
    "mse_matrix_from_pool",
    "mi_from_points",
    "mi_from_pool",
    "finite_alphabet_mi",
    "MacSystem",
    "SolveOptions",
    "FixedPointState",
    "WsrResult",
    "solve_fixed_point",
    "asymptotic_conditional_mi",
    "wsr_objective",
    "GradientWorkspace",
    "build_workspace",
    "commutation_matrix",
    "theta_terms",
    "wsr_gradient",
    "xi_matrix",
    "OptimizerConfig",
    "OptimizerTrace",
    "StartRecord",
    "IterationRecord",
    "project_power",
    "backtrack_update",
    "baseline_np",
    "optimize",
    "ExperimentConfig",
    "OracleConfig",
    "McMiResult",
    "SweepRow",
    "config_from_dict",
    "load_config",
    "mc_exact_mi",
    "run_sweep",
    "save_precoders",
    "load_precoders",
    "read_sweep_csv",
    "table_counts",
    "derive_seed",
    "derived_int",
    "rng_for",
    "complex_normal",
    "noise_pool",
    "MacPrecodeError",
    "ConfigurationError",
    "ValidationError",
    "SizeLimitError",
    "ParseError",
    "__version__",
]
