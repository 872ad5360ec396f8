"""Kalman filtering, smoothing and per-subject decomposition."""

from app.surrogate.dlm_core.decomposition import (
    fit_subject_posterior,
    gaussian_precision_product,
    information_mean,
    information_to_belief,
    path_information,
    path_posterior_paths,
    path_prior,
)
from app.surrogate.dlm_core.filter import (
    discount_for_retention,
    discount_predict,
    kalman_filter,
)
from app.surrogate.dlm_core.smoother import kalman_smoother, smooth_states
from app.surrogate.dlm_core.types import (
    DiscountConfig,
    EvolutionSchedule,
    FilterTrace,
    GaussianBelief,
    PathBasis,
    PathInformation,
    SharedPaths,
    SmoothedFit,
    StateLayout,
    SubjectPosterior,
)

__all__ = [
    "DiscountConfig",
    "EvolutionSchedule",
    "FilterTrace",
    "GaussianBelief",
    "PathBasis",
    "PathInformation",
    "SharedPaths",
    "SmoothedFit",
    "StateLayout",
    "SubjectPosterior",
    "discount_for_retention",
    "discount_predict",
    "fit_subject_posterior",
    "gaussian_precision_product",
    "information_mean",
    "information_to_belief",
    "kalman_filter",
    "kalman_smoother",
    "path_information",
    "path_posterior_paths",
    "path_prior",
    "smooth_states",
]
