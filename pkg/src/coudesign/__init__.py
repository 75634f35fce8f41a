"""D-optimal sampling designs for complex Ornstein-Uhlenbeck processes with trend."""

__version__ = "0.1.0"

from .kernel import (  # noqa: E402
    CHANDLER,
    CONSTANT,
    Design,
    NormalizationError,
    OUParams,
    TrendParams,
    TrendSpec,
    covariance_inverse_closed,
    covariance_matrix,
    g_func,
    kappa_func,
    phi_func,
    psi_func,
    r_func,
    rotation_block,
)
from .fisher import (  # noqa: E402
    FisherBlocks,
    all_params_objective,
    cov_info,
    fisher_blocks,
    full_fim,
    oracle_cov_fim,
    oracle_trend_fim,
    trend_info_general,
)
from .solver import (  # noqa: E402
    Criterion,
    DesignResult,
    FrequencyZero,
    NonConvergence,
    lambert_w0,
    optimal_cov_joint_spacing,
    optimal_omega_spacing,
    optimal_trend_spacing,
    optimize_all_params,
    reject_lambda_design,
)
from .efficiency import EfficiencyGrid, efficiency_ratio, efficiency_surface, taylor_limit_checks  # noqa: E402
from .simulator import SamplePaths, gls_trend_estimate, sample_paths  # noqa: E402
