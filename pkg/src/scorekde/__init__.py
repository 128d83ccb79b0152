"""Diffusion sampling with closed-form scores, Gaussian KDE, and the
Monte-Carlo estimators needed to compare the two.

The library is organized around the forward Ornstein-Uhlenbeck process
(:mod:`scorekde.ou`), score fields over it (:mod:`scorekde.scores`),
backward-SDE sampling (:mod:`scorekde.samplers`), kernel density
estimation (:mod:`scorekde.kde`), distance and loss estimators
(:mod:`scorekde.estimators`), CSV persistence (:mod:`scorekde.dataio`),
and config-driven experiments (:mod:`scorekde.experiments`).
"""

from .ou import (
    OUCoefficients,
    SingularityError,
    coefficients,
    conditional_score,
    forward_sample,
    transition_log_density,
)
from .scores import (
    Dataset,
    IsotropicGaussianTarget,
    ScoreField,
    conditional_score_field,
    custom_score_field,
    empirical_mixture_log_density,
    empirical_mixture_log_density_lower_bound,
    empirical_optimal_score,
    exact_gaussian_score,
    gaussian_convolution,
    gaussian_marginal,
    gaussian_mixture_logpdf,
    sample_dataset,
    softmax_weights,
    weighted_average_bounds_check,
)
from .samplers import SampleBatch, SamplerConfig, backward_sample, forward_terminal_sample
from .kde import KdeModel, forward_mixture, kde_log_density, kde_sample, scott_bandwidth
from .estimators import (
    EnergyTestResult,
    ErrorCurve,
    EstimateReport,
    NNDistanceStats,
    csm_loss,
    energy_distance_test,
    equal_mixture_sampler,
    kl_gaussians,
    loglog_slope,
    nn_distance_stats,
    score_error_protocol,
    sm_loss,
    tv_mc,
    tv_quadrature_1d,
)
from .dataio import DatasetFormatError, load_batch, load_dataset, save_batch, save_dataset
from .rng import derived_seed, substream

__version__ = "0.1.0"

__all__ = [
    "OUCoefficients",
    "SingularityError",
    "coefficients",
    "conditional_score",
    "forward_sample",
    "transition_log_density",
    "Dataset",
    "IsotropicGaussianTarget",
    "ScoreField",
    "conditional_score_field",
    "custom_score_field",
    "empirical_mixture_log_density",
    "empirical_mixture_log_density_lower_bound",
    "empirical_optimal_score",
    "exact_gaussian_score",
    "gaussian_convolution",
    "gaussian_marginal",
    "gaussian_mixture_logpdf",
    "sample_dataset",
    "softmax_weights",
    "weighted_average_bounds_check",
    "SampleBatch",
    "SamplerConfig",
    "backward_sample",
    "forward_terminal_sample",
    "KdeModel",
    "forward_mixture",
    "kde_log_density",
    "kde_sample",
    "scott_bandwidth",
    "EnergyTestResult",
    "ErrorCurve",
    "EstimateReport",
    "NNDistanceStats",
    "csm_loss",
    "energy_distance_test",
    "equal_mixture_sampler",
    "kl_gaussians",
    "loglog_slope",
    "nn_distance_stats",
    "score_error_protocol",
    "sm_loss",
    "tv_mc",
    "tv_quadrature_1d",
    "DatasetFormatError",
    "load_batch",
    "load_dataset",
    "save_batch",
    "save_dataset",
    "derived_seed",
    "substream",
]
