"""Determinantal (L-ensemble) medium-access scheduling with proportional fairness
for SINR bi-pole networks."""
from .coverage import (
    CoverageReport,
    SinrParams,
    ShannonRate,
    cardinality_rate,
    conditional_coverage,
    coverage_matrix,
    coverage_prob,
    coverage_report,
    h_func,
    throughput_constant,
    throughput_variable,
    w_func,
)
from .dpp import (
    QualityVector,
    Role,
    SymmetricKernel,
    build_L,
    factorized_prob,
    gaussian_similarity,
    marginal_from_L,
    palm_reduce,
    sample,
    scale_kernel,
    subset_prob_exact,
    subset_prob_inclusion,
)
from .errors import (
    DetschedError,
    DivergingIntegral,
    InfeasibleStart,
    InvalidArgument,
    InvalidKernel,
    NumericFailure,
    PalmUndefined,
    SizeLimit,
)
from .fairness import (
    AdaptiveAloha,
    FeatureModel,
    FixedAloha,
    LEnsemble,
    OptimizerSettings,
    extract_features,
    lower,
    optimize_adaptive_aloha,
    optimize_fixed_aloha,
    optimize_lensemble,
    quality_from_features,
    utility,
    utility_eigen,
)
from .geometry import Network, PathLossModel, cross_distance, generate_network, link_distance

__version__ = "0.1.0"

__all__ = [
    "CoverageReport",
    "SinrParams",
    "ShannonRate",
    "cardinality_rate",
    "conditional_coverage",
    "coverage_matrix",
    "coverage_prob",
    "coverage_report",
    "h_func",
    "throughput_constant",
    "throughput_variable",
    "w_func",
    "QualityVector",
    "Role",
    "SymmetricKernel",
    "build_L",
    "factorized_prob",
    "gaussian_similarity",
    "marginal_from_L",
    "palm_reduce",
    "sample",
    "scale_kernel",
    "subset_prob_exact",
    "subset_prob_inclusion",
    "DetschedError",
    "DivergingIntegral",
    "InfeasibleStart",
    "InvalidArgument",
    "InvalidKernel",
    "NumericFailure",
    "PalmUndefined",
    "SizeLimit",
    "AdaptiveAloha",
    "FeatureModel",
    "FixedAloha",
    "LEnsemble",
    "OptimizerSettings",
    "extract_features",
    "lower",
    "optimize_adaptive_aloha",
    "optimize_fixed_aloha",
    "optimize_lensemble",
    "quality_from_features",
    "utility",
    "utility_eigen",
    "Network",
    "PathLossModel",
    "cross_distance",
    "generate_network",
    "link_distance",
]

