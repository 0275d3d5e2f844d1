"""Spectral estimation of Rasch item parameters from binary response data."""

from .baselines import (
    ConditionalMatrix,
    conditional_ratio_matrix,
    eigenvector_estimate,
    exact_conditional_matrix,
    pairwise_loglik,
    pmle_mm_estimate,
    rowsum_estimate,
    theta_mle,
)
from .benchmark import ScalingReport, parse_grid, run_scaling_benchmark
from .chain import (
    ConnectivityReport,
    MarkovChain,
    PairwiseStats,
    build_chain_accelerated,
    build_chain_original,
    build_idealized_chain,
    build_reference_chain,
    check_ergodicity,
    pairwise_diff_counts,
    spectral_gap,
)
from .data import (
    INVALID_RESPONSE,
    AssignmentDiagnostics,
    GroundTruth,
    ResponseMatrix,
    assignment_stats,
    generate_synthetic,
    load_responses,
    sample_rasch_response,
    save_responses,
    split_users,
)
from .errors import (
    ContractError,
    ConvergenceError,
    DegenerateItemError,
    IncompleteMatrixError,
    InvalidNormalizerError,
    NotErgodicError,
    ParseError,
    SpectralRaschError,
    UndefinedMetricError,
)
from .estimator import EstimatorConfig, ItemEstimate, normalize_beta, recover_beta, spectral_estimate
from .metrics import MetricReport, auc, l2_error, linf_rel_error, log_likelihood, topk_accuracy
from .stationary import StationaryResult, stationary_distribution

__version__ = "0.1.0"
