"""Entropy, moments and density fitting for near-Gaussian densities."""

from .entropy import (
    EntropyReport,
    entropy_first_order,
    entropy_identity,
    entropy_second_order,
    first_order_asymmetry_check,
    first_order_entropy,
    gaussian_entropy,
    second_order_entropy,
)
from .errors import InvalidSpecError, NearGaussError, QuadratureError, RegimeError, SamplerError
from .estimator import (
    EstimationConfig,
    EstimationResult,
    bootstrap,
    empirical_moments,
    estimate,
    moment_equations,
    solve_stage,
)
from .oracle import (
    QuadratureConfig,
    oracle_entropy,
    oracle_moment,
    oracle_moments,
    oracle_normalization,
)
from .sampler import SamplerConfig, sample
from .series import (
    DensitySpec,
    MomentSet,
    SeriesResult,
    approx_moments,
    double_factorial,
    gaussian_moment,
    normalization,
    optimal_order,
    series_term,
    truncated_series,
)

__version__ = "0.1.0"

__all__ = [
    "DensitySpec",
    "EntropyReport",
    "EstimationConfig",
    "EstimationResult",
    "InvalidSpecError",
    "MomentSet",
    "NearGaussError",
    "QuadratureConfig",
    "QuadratureError",
    "RegimeError",
    "SamplerConfig",
    "SamplerError",
    "SeriesResult",
    "approx_moments",
    "bootstrap",
    "double_factorial",
    "empirical_moments",
    "entropy_first_order",
    "entropy_identity",
    "entropy_second_order",
    "estimate",
    "first_order_asymmetry_check",
    "first_order_entropy",
    "gaussian_entropy",
    "gaussian_moment",
    "moment_equations",
    "normalization",
    "optimal_order",
    "oracle_entropy",
    "oracle_moment",
    "oracle_moments",
    "oracle_normalization",
    "sample",
    "second_order_entropy",
    "series_term",
    "solve_stage",
    "truncated_series",
]
