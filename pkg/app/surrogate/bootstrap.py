"""
Subject-level bootstrap by recombining per-subject posterior factors.

After one decomposition, a replicate only needs the multiplicity of every subject
in the draw: the shared-path posterior of the resampled panel is the prior raised
to ``(sum of multiplicities) / N`` times each subject's likelihood raised to its
multiplicity.
"""

from __future__ import annotations

from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from logging import getLogger
from typing import Literal

import numpy as np

from app.common.errors import ConfigurationError, DataError
from app.config import config
from app.surrogate.design import TREATMENT, ModelSpec, Panel
from app.surrogate.dlm_core import (
    EvolutionSchedule,
    PathBasis,
    PathInformation,
    SharedPaths,
    SubjectPosterior,
    fit_subject_posterior,
    kalman_filter,
    path_posterior_paths,
    path_prior,
)
from app.surrogate.dlm_core.linalg import inverse_spd, solve_spd, symmetrize
from app.surrogate.estimators import (
    EffectPath,
    PteResult,
    compute_pte,
    denominator_eps,
    residual_contrast,
)
from app.surrogate.models import IntervalEstimate, ValidityDecision

logger = getLogger(__name__)

RecombinationMethod = Literal["joint", "per_time"]
MIN_RECOMMENDED_REPLICATES = 100
PER_TIME_KEYS = ("delta", "delta_R", "lpte", "cpte")


@dataclass(frozen=True, eq=False)
class SubjectPosteriorSet:
    """Per-subject posterior factors of one model with cached precisions.

    Args:
        spec: Full-panel model specification
        schedule: Frozen full-panel evolution schedule
        posteriors: One factor per subject, in panel order
        prior_share: Power of the shared prior carried by each factor
        basis: Shared path coordinates
        prior: Full shared path prior, or None when paths were not cached
        path_precisions: Likelihood precision over the path per subject
        path_shifts: Likelihood shift over the path per subject
        time_precisions: Inverse smoothed shared covariance per subject and time
        time_shifts: Precision-weighted smoothed shared mean per subject and time
    """

    spec: ModelSpec
    schedule: EvolutionSchedule
    posteriors: tuple[SubjectPosterior, ...]
    prior_share: float
    basis: PathBasis
    prior: PathInformation | None
    path_precisions: np.ndarray | None
    path_shifts: np.ndarray | None
    time_precisions: np.ndarray
    time_shifts: np.ndarray

    @property
    def tag(self) -> str:
        return self.spec.tag

    @property
    def n_subjects(self) -> int:
        return len(self.posteriors)

    @property
    def has_paths(self) -> bool:
        return self.path_precisions is not None


def _path_cache_bytes(n_subjects: int, basis: PathBasis) -> int:
    return n_subjects * basis.dim * basis.dim * 8


def decompose(
    spec: ModelSpec,
    panel: Panel,
    schedule: EvolutionSchedule | None = None,
    threads: int = 1,
    memory_limit: int | None = None,
) -> SubjectPosteriorSet:
    """Fit every subject's posterior factor once.

    Args:
        spec: Full-panel model specification
        panel: Panel aligned with ``spec``
        schedule: Full-panel evolution schedule; computed when omitted
        threads: Worker threads for the per-subject fits
        memory_limit: Bytes allowed for cached path information; above it only
            per-time recombination is available

    Returns:
        The posterior set
    """
    if schedule is None:
        schedule = kalman_filter(spec, panel).schedule
    n_subjects = len(spec.subject_ids)
    prior_share = 1.0 / n_subjects
    basis = PathBasis.from_spec(spec)
    memory_limit = config.joint_memory_limit if memory_limit is None else memory_limit
    with_paths = _path_cache_bytes(n_subjects, basis) <= memory_limit
    if not with_paths:
        logger.warning(
            "Path information for %d subjects over %d coordinates exceeds %d bytes; "
            "only per-time recombination is available",
            n_subjects,
            basis.dim,
            memory_limit,
        )
    prior = path_prior(spec, schedule, basis) if with_paths else None
    shared_prior = prior.scaled(prior_share) if prior is not None else None

    def fit(subject: str) -> SubjectPosterior:
        return fit_subject_posterior(
            spec,
            panel,
            subject,
            prior_share,
            schedule=schedule,
            prior=shared_prior,
            basis=basis,
            with_paths=with_paths,
        )

    logger.info("Decomposing %s model over %d subjects", spec.tag, n_subjects)
    if threads > 1:
        with ThreadPoolExecutor(
            max_workers=threads, thread_name_prefix="decompose_"
        ) as pool:
            posteriors = tuple(pool.map(fit, spec.subject_ids))
    else:
        posteriors = tuple(fit(subject) for subject in spec.subject_ids)

    n_times, p = spec.n_times, spec.layout.shared_dim
    time_precisions = np.empty((n_subjects, n_times, p, p))
    time_shifts = np.empty((n_subjects, n_times, p))
    for i, posterior in enumerate(posteriors):
        for t in range(n_times):
            precision = inverse_spd(
                posterior.shared.covariances[t], f"subject {i} covariance t={t}"
            )
            time_precisions[i, t] = precision
            time_shifts[i, t] = precision @ posterior.shared.means[t]

    path_precisions = path_shifts = None
    if with_paths:
        path_precisions = np.stack([post.likelihood.precision for post in posteriors])
        path_shifts = np.stack([post.likelihood.shift for post in posteriors])

    return SubjectPosteriorSet(
        spec=spec,
        schedule=schedule,
        posteriors=posteriors,
        prior_share=prior_share,
        basis=basis,
        prior=prior,
        path_precisions=path_precisions,
        path_shifts=path_shifts,
        time_precisions=time_precisions,
        time_shifts=time_shifts,
    )


def _counts(posterior_set: SubjectPosteriorSet, indices: Sequence[int]) -> np.ndarray:
    indices = np.asarray(indices, dtype=int)
    if indices.size == 0:
        error_msg = "Cannot recombine an empty index multiset"
        raise ConfigurationError(error_msg)
    if indices.min() < 0 or indices.max() >= posterior_set.n_subjects:
        error_msg = "Recombination indices fall outside the posterior set"
        raise ConfigurationError(error_msg)
    return np.bincount(indices, minlength=posterior_set.n_subjects).astype(float)


def recombine_information(
    posterior_set: SubjectPosteriorSet, indices: Sequence[int]
) -> PathInformation:
    """Shared path posterior of the resampled panel in information form.

    Each slot contributes one prior share, so the prior weight is the number of
    slots divided by ``N``.
    """
    counts = _counts(posterior_set, indices)
    if not posterior_set.has_paths:
        error_msg = "Posterior set was decomposed without path information"
        raise ConfigurationError(error_msg)
    prior_weight = counts.sum() * posterior_set.prior_share
    return PathInformation(
        prior_weight * posterior_set.prior.precision
        + np.tensordot(counts, posterior_set.path_precisions, axes=1),
        prior_weight * posterior_set.prior.shift + counts @ posterior_set.path_shifts,
    )


def _recombine_per_time(
    posterior_set: SubjectPosteriorSet, counts: np.ndarray, with_covariance: bool
) -> SharedPaths:
    spec = posterior_set.spec
    precisions = np.tensordot(counts, posterior_set.time_precisions, axes=1)
    shifts = np.tensordot(counts, posterior_set.time_shifts, axes=1)
    n_times = precisions.shape[0]
    means = np.empty_like(shifts)
    covariances = np.empty_like(precisions) if with_covariance else None
    for t in range(n_times):
        if with_covariance:
            covariances[t] = inverse_spd(precisions[t], f"recombined precision t={t}")
            means[t] = covariances[t] @ shifts[t]
        else:
            means[t] = solve_spd(
                symmetrize(precisions[t]), shifts[t], f"recombined precision t={t}"
            )
    return SharedPaths(spec.layout, spec.tag, means, covariances)


def recombine(
    posterior_set: SubjectPosteriorSet,
    indices: Sequence[int],
    method: RecombinationMethod = "joint",
    with_covariance: bool = False,
) -> SharedPaths:
    """Shared-block posterior paths for a multiset of subjects.

    ``joint`` combines the factors over the whole shared path and is exact.
    ``per_time`` multiplies the per-time marginal factors, which is exact for
    static states and approximate for dynamic ones.

    Args:
        posterior_set: Output of :func:`decompose`
        indices: Subject positions, duplicates allowed
        method: ``joint`` or ``per_time``
        with_covariance: Whether to return per-time covariances

    Returns:
        Per-time shared-block means (and covariances)

    Raises:
        ConfigurationError: If ``indices`` is empty or the method is unknown
    """
    if method not in ("joint", "per_time"):
        error_msg = f"Unknown recombination method '{method}'"
        raise ConfigurationError(error_msg)
    counts = _counts(posterior_set, indices)
    if method == "joint" and not posterior_set.has_paths:
        logger.warning("Path information not cached; recombining per time")
        method = "per_time"
    if method == "per_time":
        return _recombine_per_time(posterior_set, counts, with_covariance)
    information = recombine_information(posterior_set, indices)
    return path_posterior_paths(
        information, posterior_set.basis, posterior_set.spec, with_covariance
    )


def draw_indices(
    arms: np.ndarray, seed: int, replicate: int, stratified: bool = True
) -> np.ndarray:
    """Subject indices of one bootstrap replicate.

    The stream depends only on ``(seed, replicate)``, so replicates can run in any
    order. Stratified draws resample within each arm and keep the arm counts.
    """
    rng = np.random.default_rng([seed, replicate])
    arms = np.asarray(arms)
    if not stratified:
        return np.sort(rng.integers(0, arms.size, size=arms.size))
    draws = [
        rng.choice(members, size=members.size, replace=True)
        for members in (np.flatnonzero(arms == 0), np.flatnonzero(arms == 1))
        if members.size
    ]
    return np.sort(np.concatenate(draws))


@dataclass(frozen=True, eq=False)
class BootstrapDraws:
    """Paired replicate draws of both models.

    Row ``b`` of every array belongs to replicate ``b``; undefined ratios are NaN.
    """

    seed: int
    stratified: bool
    indices: np.ndarray
    delta: np.ndarray
    delta_R: np.ndarray
    lpte: np.ndarray
    cpte: np.ndarray
    pte: np.ndarray
    undefined: np.ndarray

    @property
    def replicates(self) -> int:
        return self.indices.shape[0]

    @property
    def n_times(self) -> int:
        return self.delta.shape[1]


@dataclass(frozen=True, eq=False)
class BootstrapResult:
    draws: BootstrapDraws
    point: PteResult
    level: float
    method: RecombinationMethod
    pte: IntervalEstimate
    per_time: dict[str, list[IntervalEstimate]]

    @property
    def undefined_count(self) -> int:
        return int(self.draws.undefined.sum())

    @property
    def unreliable(self) -> bool:
        return self.undefined_count > 0.5 * self.draws.replicates


def _finite_or_none(value: float) -> float | None:
    return float(value) if np.isfinite(value) else None


def interval_estimate(
    point: float, draws: np.ndarray, level: float
) -> IntervalEstimate:
    """Percentile interval and SE from replicate draws, ignoring NaN draws."""
    defined = draws[np.isfinite(draws)]
    if defined.size == 0:
        return IntervalEstimate(point=_finite_or_none(point), level=level)
    tail = 100.0 * (1.0 - level) / 2.0
    low, high = np.percentile(defined, [tail, 100.0 - tail])
    se = float(np.std(defined, ddof=1)) if defined.size > 1 else 0.0
    return IntervalEstimate(
        point=_finite_or_none(point),
        se=se,
        ci_low=float(low),
        ci_high=float(high),
        level=level,
    )


def replicate_paths(
    marginal_set: SubjectPosteriorSet,
    conditional_set: SubjectPosteriorSet,
    indices: np.ndarray,
    method: RecombinationMethod = "joint",
) -> tuple[np.ndarray, np.ndarray]:
    """Effect paths of one replicate, recomputed from recombined posteriors.

    The control average of the residual effect runs over the replicate's
    control multiset.
    """
    counts = np.bincount(indices, minlength=marginal_set.n_subjects)
    marginal = recombine(marginal_set, indices, method)
    conditional = recombine(conditional_set, indices, method)
    contrast, _ = residual_contrast(conditional_set.spec, conditional.means, counts)
    return marginal.path(TREATMENT), conditional.path(TREATMENT) + contrast


def bootstrap_pte(
    marginal_set: SubjectPosteriorSet,
    conditional_set: SubjectPosteriorSet,
    panel: Panel,
    replicates: int,
    level: float = 0.95,
    seed: int = 0,
    *,
    stratified: bool = True,
    method: RecombinationMethod = "joint",
    eps_denom: float | None = None,
    threads: int = 1,
    point: PteResult | None = None,
) -> BootstrapResult:
    """Paired recombination bootstrap of the effect paths and PTE estimands.

    Both models receive the same index multiset in every replicate. Replicates
    whose PTE is undefined are counted and left out of the percentiles.

    Args:
        marginal_set: Decomposed marginal model
        conditional_set: Decomposed conditional model
        panel: Panel both sets were built on
        replicates: Number of replicates ``B``
        level: Two-sided confidence level of the percentile intervals
        seed: Seed of the replicate streams
        stratified: Resample within arms
        method: Recombination method
        eps_denom: Denominator guard passed to :func:`compute_pte`; scaled
            from the panel outcome SD by default
        threads: Worker threads over replicates
        point: Plug-in estimate of the full fit; recombined from the identity
            multiset when omitted

    Returns:
        Draws, point estimates and interval estimates

    Raises:
        ConfigurationError: If the sets do not match the panel or settings are
            invalid
    """
    if replicates < 1 or not 0.0 < level < 1.0:
        error_msg = f"Invalid bootstrap settings: B={replicates}, level={level}"
        raise ConfigurationError(error_msg)
    for posterior_set in (marginal_set, conditional_set):
        if tuple(posterior_set.spec.subject_ids) != tuple(panel.subject_ids):
            error_msg = f"The {posterior_set.tag} posterior set does not match panel"
            raise ConfigurationError(error_msg)
    if replicates < MIN_RECOMMENDED_REPLICATES:
        logger.warning(
            "Only %d bootstrap replicates; at least %d are recommended",
            replicates,
            MIN_RECOMMENDED_REPLICATES,
        )

    if point is not None and point.delta.n_times != panel.n_times:
        error_msg = (
            f"Point estimate covers {point.delta.n_times} times, panel has "
            f"{panel.n_times}"
        )
        raise ConfigurationError(error_msg)
    if eps_denom is None:
        eps_denom = denominator_eps(panel)
    if point is None:
        identity = np.arange(panel.n_subjects)
        point_delta, point_delta_R = replicate_paths(
            marginal_set, conditional_set, identity, method
        )
        point = compute_pte(
            EffectPath(point_delta, "delta"),
            EffectPath(point_delta_R, "delta_R"),
            eps_denom,
        )

    def run(b: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        indices = draw_indices(panel.arms, seed, b, stratified)
        nan = np.full(panel.n_times, np.nan)
        if np.unique(panel.arms[indices]).size < 2:
            logger.warning("Replicate %d is undefined: one arm was not drawn", b)
            return indices, nan, nan
        try:
            delta, delta_R = replicate_paths(
                marginal_set, conditional_set, indices, method
            )
        except DataError as e:
            logger.warning("Replicate %d is undefined: %s", b, e)
            return indices, nan, nan
        return indices, delta, delta_R

    logger.info("Running %d bootstrap replicates (%s)", replicates, method)
    if threads > 1:
        with ThreadPoolExecutor(
            max_workers=threads, thread_name_prefix="bootstrap_"
        ) as pool:
            results = list(pool.map(run, range(replicates)))
    else:
        results = [run(b) for b in range(replicates)]

    indices = np.stack([r[0] for r in results])
    deltas = np.stack([r[1] for r in results])
    delta_Rs = np.stack([r[2] for r in results])
    lptes = np.full_like(deltas, np.nan)
    cptes = np.full_like(deltas, np.nan)
    for b in range(replicates):
        if not np.isfinite(deltas[b]).all() or not np.isfinite(delta_Rs[b]).all():
            continue
        result = compute_pte(
            EffectPath(deltas[b], "delta"),
            EffectPath(delta_Rs[b], "delta_R"),
            eps_denom,
        )
        lptes[b], cptes[b] = result.lpte, result.cpte
    ptes = cptes[:, -1].copy()
    draws = BootstrapDraws(
        seed=seed,
        stratified=stratified,
        indices=indices,
        delta=deltas,
        delta_R=delta_Rs,
        lpte=lptes,
        cpte=cptes,
        pte=ptes,
        undefined=~np.isfinite(ptes),
    )

    points = {
        "delta": point.delta.values,
        "delta_R": point.delta_R.values,
        "lpte": point.lpte,
        "cpte": point.cpte,
    }
    samples = {"delta": deltas, "delta_R": delta_Rs, "lpte": lptes, "cpte": cptes}
    per_time = {
        key: [
            interval_estimate(points[key][t], samples[key][:, t], level)
            for t in range(panel.n_times)
        ]
        for key in PER_TIME_KEYS
    }
    result = BootstrapResult(
        draws=draws,
        point=point,
        level=level,
        method=method,
        pte=interval_estimate(point.pte, ptes, level),
        per_time=per_time,
    )
    if result.undefined_count:
        logger.warning(
            "%d of %d replicates have an undefined PTE",
            result.undefined_count,
            replicates,
        )
    if result.unreliable:
        logger.warning("Bootstrap unreliable: over half the replicates undefined")
    return result


def validity_test(
    pte_interval: IntervalEstimate, threshold: float = 0.75, alpha: float = 0.05
) -> ValidityDecision:
    """Test H0: PTE <= threshold by comparing the interval's lower bound.

    The interval must have level ``1 - 2 * alpha``. H0 is rejected only when the
    lower bound strictly exceeds the threshold.

    Raises:
        ConfigurationError: If the interval level does not match ``alpha``
    """
    if not np.isclose(pte_interval.level, 1.0 - 2.0 * alpha, rtol=0.0, atol=1e-9):
        error_msg = (
            f"Interval level {pte_interval.level} does not match a one-sided test "
            f"at alpha={alpha}; expected level {1.0 - 2.0 * alpha}"
        )
        raise ConfigurationError(error_msg)
    reject = pte_interval.ci_low is not None and pte_interval.ci_low > threshold
    return ValidityDecision(
        threshold=threshold,
        alpha=alpha,
        level=pte_interval.level,
        ci_low=pte_interval.ci_low,
        reject=reject,
    )
