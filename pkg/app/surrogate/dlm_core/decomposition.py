"""
Per-subject decomposition of the full-panel posterior.

Subject levels are a priori independent of each other and of the shared states, so
the posterior over the shared path factorizes as a product over subjects of
``prior ** (1 / N) * likelihood_i``. Each factor is computed on the reduced state
(shared block plus the subject's own level) under the frozen full-panel
evolution schedule.
"""

from __future__ import annotations

from collections.abc import Sequence
from logging import getLogger
from typing import TYPE_CHECKING

import numpy as np
from scipy import linalg

from app.common.errors import ConfigurationError
from app.surrogate.dlm_core.filter import kalman_filter
from app.surrogate.dlm_core.linalg import (
    cholesky,
    inverse_spd,
    solve_spd,
    symmetrize,
)
from app.surrogate.dlm_core.smoother import kalman_smoother
from app.surrogate.dlm_core.types import (
    EvolutionSchedule,
    GaussianBelief,
    PathBasis,
    PathInformation,
    SharedPaths,
    SubjectPosterior,
)

if TYPE_CHECKING:
    from app.surrogate.design.panel import Panel
    from app.surrogate.design.spec import ModelSpec

logger = getLogger(__name__)


def gaussian_precision_product(beliefs: Sequence[GaussianBelief]) -> GaussianBelief:
    """Normalized product of Gaussian densities over the same block.

    ``C = (sum C_i^{-1})^{-1}`` and ``m = C sum C_i^{-1} m_i``.

    Args:
        beliefs: Beliefs over the same block and time index

    Returns:
        The product belief

    Raises:
        ConfigurationError: If the inputs are empty or differ in dimension or time
        NumericalError: If a covariance cannot be inverted even after jitter
    """
    if not beliefs:
        error_msg = "Precision product needs at least one belief"
        raise ConfigurationError(error_msg)
    first = beliefs[0]
    for belief in beliefs[1:]:
        if belief.dim != first.dim:
            error_msg = (
                f"Cannot multiply beliefs of dimension {first.dim} and {belief.dim}"
            )
            raise ConfigurationError(error_msg)
        if belief.t != first.t:
            error_msg = f"Cannot multiply beliefs at times {first.t} and {belief.t}"
            raise ConfigurationError(error_msg)
    if len(beliefs) == 1:
        return GaussianBelief(first.mean.copy(), first.covariance.copy(), first.t)

    precision = np.zeros((first.dim, first.dim))
    shift = np.zeros(first.dim)
    for k, belief in enumerate(beliefs):
        factor_precision = inverse_spd(belief.covariance, f"belief {k} covariance")
        precision += factor_precision
        shift += factor_precision @ belief.mean
    return information_to_belief(
        PathInformation(symmetrize(precision), shift), first.t
    )


def information_to_belief(
    information: PathInformation, t: int | None = None
) -> GaussianBelief:
    """Convert an information-form Gaussian to moment form."""
    factor = cholesky(information.precision, "combined precision")
    mean = linalg.cho_solve(factor, information.shift, check_finite=False)
    covariance = linalg.cho_solve(
        factor, np.eye(information.precision.shape[0]), check_finite=False
    )
    return GaussianBelief(mean, symmetrize(covariance), t)


def information_mean(information: PathInformation) -> np.ndarray:
    """Mean of an information-form Gaussian, skipping the covariance."""
    return solve_spd(information.precision, information.shift, "combined precision")


def path_prior(
    spec: ModelSpec,
    schedule: EvolutionSchedule,
    basis: PathBasis | None = None,
    share: float = 1.0,
) -> PathInformation:
    """Shared path prior in information form, raised to the power ``share``.

    The random-walk prior on the dynamic coordinates has a block-tridiagonal
    precision; static coordinates keep their diagonal prior precision.

    Args:
        spec: Materialized model supplying the prior and discount groups
        schedule: Full-panel evolution covariances
        basis: Path coordinates; derived from ``spec`` when omitted
        share: Power applied to the prior

    Returns:
        Precision and shift ``Q z0`` scaled by ``share``
    """
    basis = basis or PathBasis.from_spec(spec)
    static = list(basis.static)
    dynamic = list(basis.dynamic)
    n_static, n_dynamic = len(static), len(dynamic)
    precision = np.zeros((basis.dim, basis.dim))

    variances = np.asarray(spec.prior.shared_variance, dtype=float)
    diagonal = np.arange(n_static)
    precision[diagonal, diagonal] = 1.0 / variances[static]
    if n_dynamic:
        block = slice(n_static, n_static + n_dynamic)
        precision[block, block] += np.diag(1.0 / variances[dynamic])
        for t in range(1, basis.n_times):
            evolution = schedule.shared[t][np.ix_(dynamic, dynamic)]
            inverse = inverse_spd(evolution, f"evolution covariance t={t}")
            previous = slice(n_static + (t - 1) * n_dynamic, n_static + t * n_dynamic)
            current = slice(n_static + t * n_dynamic, n_static + (t + 1) * n_dynamic)
            precision[previous, previous] += inverse
            precision[current, current] += inverse
            precision[previous, current] -= inverse
            precision[current, previous] -= inverse

    prior_mean = np.zeros(basis.dim)
    for t in range(basis.n_times):
        prior_mean[basis.coordinates(t)] = spec.prior.mean
    precision = symmetrize(precision)
    return PathInformation(share * precision, share * (precision @ prior_mean))


def path_information(
    spec: ModelSpec,
    panel: Panel,
    subject: int,
    schedule: EvolutionSchedule,
    basis: PathBasis | None = None,
) -> PathInformation:
    """Information one subject's outcomes carry about the shared path.

    The subject's own level path is integrated out: its covariance between times
    ``s`` and ``t`` is the level prior variance plus the level evolution variance
    accumulated up to ``min(s, t)``.

    Args:
        spec: Materialized model
        panel: Observed panel aligned with ``spec``
        subject: Position of the subject in the panel
        schedule: Full-panel evolution covariances
        basis: Path coordinates; derived from ``spec`` when omitted

    Returns:
        ``F' S^{-1} F`` and ``F' S^{-1} y`` over the observed cells
    """
    basis = basis or PathBasis.from_spec(spec)
    times = np.flatnonzero(spec.usable[subject])
    precision = np.zeros((basis.dim, basis.dim))
    shift = np.zeros(basis.dim)
    if times.size == 0:
        return PathInformation(precision, shift)

    design = np.zeros((times.size, basis.dim))
    for row, t in enumerate(times):
        design[row, basis.coordinates(t)] += spec.rows[subject, t]
    outcome = panel.outcome[subject, times]

    accumulated = spec.prior.level_variance + np.cumsum(schedule.levels[:, subject])
    covariance = accumulated[np.minimum.outer(times, times)]
    covariance[np.diag_indices(times.size)] += spec.observation_variance(subject)
    factor = cholesky(covariance, f"marginal covariance of subject {subject}")
    weighted = linalg.cho_solve(factor, design, check_finite=False)
    precision = symmetrize(design.T @ weighted)
    shift = weighted.T @ outcome
    return PathInformation(precision, shift)


def fit_subject_posterior(
    spec: ModelSpec,
    panel: Panel,
    subject: str,
    prior_share: float | None = None,
    *,
    schedule: EvolutionSchedule | None = None,
    prior: PathInformation | None = None,
    basis: PathBasis | None = None,
    with_paths: bool = True,
) -> SubjectPosterior:
    """Fit the posterior factor of a single subject.

    Args:
        spec: Materialized full-panel model
        panel: Observed panel aligned with ``spec``
        subject: Subject id
        prior_share: Power applied to the shared prior, ``1 / N`` by default
        schedule: Full-panel evolution schedule; a full-panel filter is run to
            obtain it when omitted
        prior: Precomputed shared path prior raised to ``prior_share``
        basis: Path coordinates; derived from ``spec`` when omitted
        with_paths: Whether to compute the information over the shared path

    Returns:
        The subject posterior

    Raises:
        DataError: If the subject is not in the panel
        ConfigurationError: If ``prior_share`` is not positive
    """
    index = spec.subject_index(subject)
    n_subjects = len(spec.subject_ids)
    prior_share = 1.0 / n_subjects if prior_share is None else prior_share
    if prior_share <= 0.0:
        error_msg = f"Prior share must be positive, got {prior_share}"
        raise ConfigurationError(error_msg)
    if schedule is None:
        schedule = kalman_filter(spec, panel).schedule

    trace = kalman_filter(
        spec.subset([index]),
        panel.take([index], rename=False),
        schedule=schedule.take([index], shared_scale=1.0 / prior_share),
        prior_share=prior_share,
    )
    fit = kalman_smoother(trace)
    shared = SharedPaths(
        layout=spec.layout,
        tag=spec.tag,
        means=fit.shared.means,
        covariances=fit.shared.covariances,
    )

    likelihood = None
    if with_paths:
        basis = basis or PathBasis.from_spec(spec)
        prior = prior or path_prior(spec, schedule, basis, prior_share)
        likelihood = path_information(spec, panel, index, schedule, basis)
    else:
        basis = prior = None

    return SubjectPosterior(
        subject_id=subject,
        index=index,
        arm=int(spec.arms[index]),
        prior_share=prior_share,
        shared=shared,
        level_means=fit.level_means[:, 0].copy(),
        level_variances=fit.level_variances[:, 0].copy(),
        trace=trace,
        basis=basis,
        prior=prior,
        likelihood=likelihood,
    )


def path_posterior_paths(
    information: PathInformation,
    basis: PathBasis,
    spec: ModelSpec,
    with_covariance: bool = True,
) -> SharedPaths:
    """Per-time shared beliefs implied by an information-form path posterior."""
    if with_covariance:
        belief = information_to_belief(information)
        means, covariances = basis.marginals(belief.mean, belief.covariance)
    else:
        means, covariances = basis.marginals(information_mean(information))
    return SharedPaths(spec.layout, spec.tag, means, covariances)
