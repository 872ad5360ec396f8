"""
Baseline PTE estimators: independent per-time least squares and endpoint change
scores ("Diff"). Neither pools information across time.
"""

import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from logging import getLogger
from typing import Literal

import numpy as np

from app.common.errors import ConfigurationError, DataError, NumericalError
from app.surrogate.bootstrap import draw_indices, interval_estimate
from app.surrogate.design import (
    ConditionalConfig,
    ModelSpec,
    Panel,
    build_conditional,
    build_marginal,
)
from app.surrogate.estimators import (
    EffectPath,
    compute_pte,
    denominator_eps,
    residual_contrast,
)
from app.surrogate.models import IntervalEstimate

logger = getLogger(__name__)

MIN_PER_ARM = 2
NEAR_ZERO_SE = 3.0


@dataclass(frozen=True, eq=False)
class BaselineResult:
    """Estimate of a baseline method.

    Args:
        method: ``ols`` or ``diff``
        delta: Treatment effect per time for ``ols``; the endpoint contrast for
            ``diff``
        delta_R: Residual effect, shaped like ``delta``
        pte: PTE estimate, NaN when undefined
        flagged: Times whose regressions were infeasible (``ols``)
        dropped: Subjects dropped for missing endpoints (``diff``)
        delta_se: Standard error of the endpoint contrast (``diff``)
        interval: Bootstrap interval of the PTE, once computed
        draws: Replicate PTE draws, once computed
    """

    method: Literal["ols", "diff"]
    delta: np.ndarray
    delta_R: np.ndarray
    pte: float
    flagged: tuple[int, ...] = ()
    dropped: int = 0
    delta_se: float | None = None
    interval: IntervalEstimate | None = None
    draws: np.ndarray | None = None

    @property
    def pte_undefined(self) -> bool:
        return not np.isfinite(self.pte)


def _cross_section(
    spec: ModelSpec, outcome: np.ndarray, t: int
) -> tuple[np.ndarray | None, str | None]:
    """Least-squares coefficients of one time, or the reason they are missing."""
    usable = spec.usable[:, t]
    arms = spec.arms[usable]
    if min(np.sum(arms == 0), np.sum(arms == 1)) < MIN_PER_ARM:
        return None, f"fewer than {MIN_PER_ARM} usable subjects in an arm"

    design = spec.rows[usable, t]
    response = outcome[usable, t]
    active = np.flatnonzero(np.any(design != 0.0, axis=0))
    coefficients, _, rank, _ = np.linalg.lstsq(design[:, active], response, rcond=None)
    if rank < active.size:
        return None, f"rank {rank} below {active.size} columns"
    full = np.zeros(spec.layout.shared_dim)
    full[active] = coefficients
    return full, None


def per_time_coefficients(
    spec: ModelSpec, outcome: np.ndarray, threads: int = 1
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Independent cross-sectional fits of a working model at every time.

    Returns:
        Coefficients of shape ``(T + 1, p)`` with NaN rows at flagged times, and
        the flagged times
    """

    def fit(t: int) -> tuple[np.ndarray | None, str | None]:
        return _cross_section(spec, outcome, t)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads, thread_name_prefix="ols_") as pool:
            fits = list(pool.map(fit, range(spec.n_times)))
    else:
        fits = [fit(t) for t in range(spec.n_times)]

    coefficients = np.full((spec.n_times, spec.layout.shared_dim), np.nan)
    flagged = []
    for t, (values, reason) in enumerate(fits):
        if values is None:
            logger.warning("Per-time %s fit flagged at t=%d: %s", spec.tag, t, reason)
            flagged.append(t)
        else:
            coefficients[t] = values
    return coefficients, tuple(flagged)


def ols_pte(
    panel: Panel,
    config: ConditionalConfig | None = None,
    eps_denom: float | None = None,
    threads: int = 1,
) -> BaselineResult:
    """Naive per-time OLS version of the plug-in estimands.

    The marginal model ``Y ~ 1 + G`` and the conditional model with the same
    surrogate terms as the state-space fit are solved separately at each time.
    The PTE is left undefined when any time is flagged.
    """
    config = config or ConditionalConfig()
    if eps_denom is None:
        eps_denom = denominator_eps(panel)
    marginal = build_marginal(panel, config.covariates)
    conditional = build_conditional(panel, config)

    marginal_coefficients, marginal_flags = per_time_coefficients(
        marginal, panel.outcome, threads
    )
    conditional_coefficients, conditional_flags = per_time_coefficients(
        conditional, panel.outcome, threads
    )
    delta = marginal_coefficients[:, 1]
    contrast, _ = residual_contrast(
        conditional, np.nan_to_num(conditional_coefficients)
    )
    delta_R = conditional_coefficients[:, 1] + contrast
    flagged = tuple(sorted(set(marginal_flags) | set(conditional_flags)))

    pte = np.nan
    if not flagged:
        result = compute_pte(
            EffectPath(delta, "delta"), EffectPath(delta_R, "delta_R"), eps_denom
        )
        pte = result.pte
    return BaselineResult(
        method="ols", delta=delta, delta_R=delta_R, pte=pte, flagged=flagged
    )


def diff_pte(panel: Panel, eps_denom: float | None = None) -> BaselineResult:
    """Endpoint change-score PTE.

    The marginal contrast is the difference of mean outcome changes
    ``Y_T - Y_0`` between arms; the residual contrast is the treatment
    coefficient of ``Y_T - Y_0`` regressed on an intercept, the arm and
    ``S_T - S_0``. It is only meaningful for monotone treatment effects.
    The PTE is flagged undefined when the endpoint contrast lies within
    ``NEAR_ZERO_SE`` standard errors of zero, as for effects that return to
    baseline by the last visit.

    Raises:
        DataError: If fewer than two subjects per arm have both endpoints
    """
    complete = (
        panel.outcome_observed[:, 0]
        & panel.outcome_observed[:, -1]
        & panel.surrogate_observed[:, 0]
        & panel.surrogate_observed[:, -1]
    )
    dropped = int(np.sum(~complete))
    if dropped:
        logger.warning("Diff estimator dropped %d subjects without endpoints", dropped)
    arms = panel.arms[complete]
    if min(np.sum(arms == 0), np.sum(arms == 1)) < MIN_PER_ARM:
        error_msg = f"Diff estimator needs {MIN_PER_ARM} per arm with both endpoints"
        raise DataError(error_msg)

    outcome_change = panel.outcome[complete, -1] - panel.outcome[complete, 0]
    surrogate_change = panel.surrogate[complete, -1] - panel.surrogate[complete, 0]
    delta = outcome_change[arms == 1].mean() - outcome_change[arms == 0].mean()
    design = np.column_stack([np.ones(arms.size), arms, surrogate_change])
    coefficients, _, rank, _ = np.linalg.lstsq(design, outcome_change, rcond=None)
    delta_R = coefficients[1] if rank == 3 else np.nan

    delta_se = math.sqrt(
        outcome_change[arms == 1].var(ddof=1) / np.sum(arms == 1)
        + outcome_change[arms == 0].var(ddof=1) / np.sum(arms == 0)
    )
    if eps_denom is None:
        eps_denom = denominator_eps(panel)

    pte = np.nan
    if rank < 3:
        logger.warning("Diff estimator flagged: surrogate changes are collinear")
    elif abs(delta) < max(eps_denom, NEAR_ZERO_SE * delta_se):
        logger.warning(
            "Diff estimator flagged: endpoint effect %.3g within %.0f SE (%.3g)",
            delta,
            NEAR_ZERO_SE,
            delta_se,
        )
    else:
        pte = float(1.0 - delta_R / delta)
    return BaselineResult(
        method="diff",
        delta=np.array([delta]),
        delta_R=np.array([delta_R]),
        pte=pte,
        dropped=dropped,
        delta_se=delta_se,
    )


def bootstrap_baseline(
    panel: Panel,
    estimator: Callable[[Panel], BaselineResult],
    replicates: int,
    level: float = 0.95,
    seed: int = 0,
    *,
    stratified: bool = True,
    threads: int = 1,
) -> BaselineResult:
    """Percentile bootstrap of a baseline by full refits.

    Replicate ``b`` uses the same subject indices as the recombination bootstrap
    with the same seed, so the two are paired.

    Raises:
        ConfigurationError: If the settings are invalid
    """
    if replicates < 1 or not 0.0 < level < 1.0:
        error_msg = f"Invalid bootstrap settings: B={replicates}, level={level}"
        raise ConfigurationError(error_msg)
    point = estimator(panel)

    def run(b: int) -> float:
        indices = draw_indices(panel.arms, seed, b, stratified)
        if np.unique(panel.arms[indices]).size < 2:
            return np.nan
        try:
            return estimator(panel.take(indices)).pte
        except (DataError, NumericalError) as e:
            logger.debug("Baseline replicate %d is undefined: %s", b, e)
            return np.nan

    if threads > 1:
        with ThreadPoolExecutor(
            max_workers=threads, thread_name_prefix="baseline_"
        ) as pool:
            draws = np.array(list(pool.map(run, range(replicates))))
    else:
        draws = np.array([run(b) for b in range(replicates)])
    undefined = int(np.sum(~np.isfinite(draws)))
    if undefined:
        logger.warning(
            "%d of %d %s replicates have an undefined PTE",
            undefined,
            replicates,
            point.method,
        )
    return replace(
        point, interval=interval_estimate(point.pte, draws, level), draws=draws
    )
