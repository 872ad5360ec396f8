"""
Forward filtering for the replicated-series dynamic linear model.

Evolution is the identity with discount-derived evolution covariances: for each
block ``W_t = (1 - d) / d * C_{t-1}``, so the predictive block covariance is
``C_{t-1} / d``. Observations are processed one cell at a time in subject order
with the Joseph-form covariance update.
"""

from __future__ import annotations

from logging import getLogger
from typing import TYPE_CHECKING

import numpy as np

from app.common.errors import ConfigurationError, DataError
from app.surrogate.dlm_core.linalg import symmetrize
from app.surrogate.dlm_core.types import (
    DiscountConfig,
    EvolutionSchedule,
    FilterTrace,
    GaussianBelief,
    StateLayout,
)

if TYPE_CHECKING:
    from app.surrogate.design.panel import Panel
    from app.surrogate.design.spec import ModelSpec

logger = getLogger(__name__)


def discount_for_retention(retained: float, steps: int = 1) -> float:
    """Per-step discount that keeps ``retained`` of the information after ``steps``.

    Args:
        retained: Fraction of precision kept after ``steps`` evolutions, in (0, 1]
        steps: Number of evolution steps

    Returns:
        The discount ``retained ** (1 / steps)``

    Raises:
        ConfigurationError: If ``retained`` or ``steps`` is out of range
    """
    if not 0.0 < retained <= 1.0:
        error_msg = f"Retained information fraction {retained} must lie in (0, 1]"
        raise ConfigurationError(error_msg)
    if steps < 1:
        error_msg = f"Number of steps must be at least 1, got {steps}"
        raise ConfigurationError(error_msg)
    return float(retained ** (1.0 / steps))


def _evolution_factor(discount: float) -> float:
    if not 0.0 < discount <= 1.0:
        error_msg = f"Discount {discount} must lie in (0, 1]"
        raise ConfigurationError(error_msg)
    return (1.0 - discount) / discount


def _discount_evolution(
    covariance: np.ndarray,
    layout: StateLayout,
    config: DiscountConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal evolution covariance derived from the previous posterior.

    Returns:
        The shared-block evolution covariance and the vector of level variances
    """
    p = layout.shared_dim
    shared = np.zeros((p, p))
    for group, indices in layout.groups:
        factor = _evolution_factor(config.for_group(group))
        if factor == 0.0 or not indices:
            continue
        block = np.ix_(indices, indices)
        shared[block] = factor * covariance[block]
    level_factor = _evolution_factor(config.subject_discount)
    levels = level_factor * np.diag(covariance)[p:].copy()
    return shared, levels


def _add_evolution(
    covariance: np.ndarray, shared: np.ndarray, levels: np.ndarray
) -> np.ndarray:
    p = shared.shape[0]
    predicted = covariance.copy()
    predicted[:p, :p] += shared
    diagonal = np.arange(p, predicted.shape[0])
    predicted[diagonal, diagonal] += levels
    return symmetrize(predicted)


def discount_predict(
    belief: GaussianBelief,
    config: DiscountConfig,
    layout: StateLayout | None = None,
) -> GaussianBelief:
    """One identity-evolution prediction step under discounting.

    Without a layout the whole belief is treated as a single block discounted by
    ``config.shared_discount``.

    Args:
        belief: Filtered belief at ``t - 1``
        config: Discount factors
        layout: State layout assigning coordinates to discount blocks

    Returns:
        The predictive belief at ``t`` with the same mean

    Raises:
        ConfigurationError: If a discount is outside (0, 1] or the layout does not
            match the belief dimension
    """
    covariance = belief.covariance
    t = None if belief.t is None else belief.t + 1
    if layout is None:
        factor = _evolution_factor(config.shared_discount)
        predicted = symmetrize(covariance + factor * covariance)
        return GaussianBelief(belief.mean.copy(), predicted, t)

    if layout.total_dim != belief.dim:
        error_msg = (
            f"Layout dimension {layout.total_dim} does not match belief "
            f"dimension {belief.dim}"
        )
        raise ConfigurationError(error_msg)
    shared, levels = _discount_evolution(covariance, layout, config)
    return GaussianBelief(
        belief.mean.copy(), _add_evolution(covariance, shared, levels), t
    )


def _scalar_update(
    mean: np.ndarray,
    covariance: np.ndarray,
    indices: np.ndarray,
    values: np.ndarray,
    observation: float,
    variance: float,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    """Joseph-form update with one scalar observation ``y = f' theta + e``."""
    cf = covariance[:, indices] @ values
    forecast_variance = float(values @ cf[indices]) + variance
    error = observation - float(values @ mean[indices])
    gain = cf / forecast_variance
    updated_mean = mean + gain * error
    updated = (
        covariance
        - np.outer(gain, cf)
        - np.outer(cf, gain)
        + forecast_variance * np.outer(gain, gain)
    )
    return updated_mean, symmetrize(updated), error, forecast_variance


def _initial_belief(spec: ModelSpec, prior_share: float) -> GaussianBelief:
    layout = spec.layout
    mean = np.zeros(layout.total_dim)
    mean[: layout.shared_dim] = spec.prior.mean
    variances = np.empty(layout.total_dim)
    variances[: layout.shared_dim] = spec.prior.shared_variance / prior_share
    variances[layout.shared_dim :] = spec.prior.level_variance
    return GaussianBelief(mean, np.diag(variances), 0)


def _check_inputs(spec: ModelSpec, panel: Panel) -> None:
    n_subjects, n_times, p = spec.rows.shape
    if p != spec.layout.shared_dim:
        error_msg = (
            f"Design rows have {p} columns but the layout has "
            f"{spec.layout.shared_dim} shared states"
        )
        raise ConfigurationError(error_msg)
    if spec.layout.n_subjects != n_subjects:
        error_msg = (
            f"Layout holds {spec.layout.n_subjects} subject levels but the design "
            f"has {n_subjects} subjects"
        )
        raise ConfigurationError(error_msg)
    if tuple(panel.subject_ids) != tuple(spec.subject_ids):
        error_msg = "Panel subjects do not match the model specification"
        raise ConfigurationError(error_msg)
    if panel.n_times != n_times:
        error_msg = (
            f"Panel has {panel.n_times} time points but the design has {n_times}"
        )
        raise ConfigurationError(error_msg)


def kalman_filter(
    spec: ModelSpec,
    panel: Panel,
    *,
    schedule: EvolutionSchedule | None = None,
    prior_share: float = 1.0,
) -> FilterTrace:
    """Run the forward pass over ``t = 0..T``.

    Args:
        spec: Materialized model
        panel: Observed panel, subject-aligned with ``spec``
        schedule: Fixed evolution covariances to use instead of discounting
        prior_share: Power applied to the shared-block prior, scaling its
            precision

    Returns:
        The filter trace, including the evolution schedule that was used

    Raises:
        ConfigurationError: If the design does not match the layout or panel
        DataError: If a usable cell holds a non-finite outcome
    """
    _check_inputs(spec, panel)
    layout = spec.layout
    n_subjects, n_times, p = spec.rows.shape
    dim = layout.total_dim
    if schedule is not None and (
        schedule.shared.shape != (n_times, p, p)
        or schedule.levels.shape != (n_times, n_subjects)
    ):
        error_msg = "Evolution schedule does not match the model dimensions"
        raise ConfigurationError(error_msg)

    predicted_means = np.empty((n_times, dim))
    predicted_covariances = np.empty((n_times, dim, dim))
    filtered_means = np.empty((n_times, dim))
    filtered_covariances = np.empty((n_times, dim, dim))
    used_shared = np.zeros((n_times, p, p))
    used_levels = np.zeros((n_times, n_subjects))
    n_observations = np.zeros(n_times, dtype=int)
    residuals = []

    prior = _initial_belief(spec, prior_share)
    mean, covariance = prior.mean, prior.covariance
    for t in range(n_times):
        if t > 0:
            if schedule is None:
                shared, levels = _discount_evolution(covariance, layout, spec.discounts)
            else:
                shared, levels = schedule.shared[t], schedule.levels[t]
            used_shared[t] = shared
            used_levels[t] = levels
            covariance = _add_evolution(covariance, shared, levels)
        predicted_means[t] = mean
        predicted_covariances[t] = covariance

        cells = []
        for i in np.flatnonzero(spec.usable[:, t]):
            observation = panel.outcome[i, t]
            if not np.isfinite(observation):
                error_msg = (
                    f"Non-finite outcome for subject {panel.subject_ids[i]} "
                    f"(i={i}, t={t})"
                )
                raise DataError(error_msg)
            indices, values = spec.design_row(i, t)
            mean, covariance, error, variance = _scalar_update(
                mean,
                covariance,
                indices,
                values,
                float(observation),
                spec.observation_variance(i),
            )
            cells.append((i, error, variance))

        n_observations[t] = len(cells)
        residuals.append(np.array(cells, dtype=float).reshape(-1, 3))
        filtered_means[t] = mean
        filtered_covariances[t] = covariance
        logger.debug("Filtered t=%d with %d observations", t, len(cells))

    return FilterTrace(
        spec=spec,
        predicted_means=predicted_means,
        predicted_covariances=predicted_covariances,
        filtered_means=filtered_means,
        filtered_covariances=filtered_covariances,
        residuals=tuple(residuals),
        n_observations=n_observations,
        schedule=schedule
        if schedule is not None
        else EvolutionSchedule(used_shared, used_levels),
    )
