from __future__ import annotations

from logging import getLogger

import numpy as np

from app.common.errors import NumericalError
from app.surrogate.dlm_core.linalg import solve_spd, symmetrize
from app.surrogate.dlm_core.types import FilterTrace, SharedPaths, SmoothedFit

logger = getLogger(__name__)


def smooth_states(trace: FilterTrace) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-interval backward recursion over the full state vector.

    With identity evolution the smoother gain is ``C_t R_{t+1}^{-1}``.

    Returns:
        Smoothed means ``(T + 1, dim)`` and covariances ``(T + 1, dim, dim)``

    Raises:
        NumericalError: If a predictive covariance cannot be inverted, naming ``t``
    """
    n_times = trace.n_times
    means = trace.filtered_means.copy()
    covariances = trace.filtered_covariances.copy()
    for t in range(n_times - 2, -1, -1):
        filtered = trace.filtered_covariances[t]
        predicted = trace.predicted_covariances[t + 1]
        try:
            # R and C are symmetric, so (R^{-1} C)^T = C R^{-1}
            gain = solve_spd(predicted, filtered, f"predictive covariance t={t + 1}").T
        except NumericalError as e:
            error_msg = f"Smoother failed: singular predictive covariance at t={t + 1}"
            raise NumericalError(error_msg) from e
        means[t] = trace.filtered_means[t] + gain @ (
            means[t + 1] - trace.predicted_means[t + 1]
        )
        covariances[t] = symmetrize(
            filtered + gain @ (covariances[t + 1] - predicted) @ gain.T
        )
    return means, covariances


def kalman_smoother(trace: FilterTrace) -> SmoothedFit:
    """Smooth a completed filter trace and extract the named shared paths.

    Args:
        trace: Output of :func:`kalman_filter`

    Returns:
        The smoothed fit; at ``t = T`` it equals the filtered belief exactly
    """
    spec = trace.spec
    p = spec.layout.shared_dim
    means, covariances = smooth_states(trace)
    shared = SharedPaths(
        layout=spec.layout,
        tag=spec.tag,
        means=means[:, :p].copy(),
        covariances=covariances[:, :p, :p].copy(),
    )
    level_variances = np.diagonal(covariances, axis1=1, axis2=2)[:, p:].copy()
    logger.debug("Smoothed %s model over %d time points", spec.tag, trace.n_times)
    return SmoothedFit(
        spec=spec,
        shared=shared,
        level_means=means[:, p:].copy(),
        level_variances=level_variances,
        schedule=trace.schedule,
    )
