"""
Builders for the marginal and conditional working models.

The marginal model explains the outcome by a shared intercept path, a per-time
treatment coefficient, static covariate coefficients and a random-walk level per
subject. The conditional model adds surrogate effects for lags ``0..K``, with
optional treatment-specific surrogate terms.
"""

from collections.abc import Sequence
from logging import getLogger

import numpy as np

from app.common.errors import ConfigurationError, DataError
from app.surrogate.design.basis import design_columns
from app.surrogate.design.panel import Panel
from app.surrogate.design.spec import (
    CONDITIONAL,
    MARGINAL,
    ConditionalConfig,
    ModelSpec,
    PriorConfig,
    PriorSpec,
)
from app.surrogate.dlm_core.types import DiscountConfig, StateLayout

logger = getLogger(__name__)

INTERCEPT = "intercept"
TREATMENT = "treatment"


def covariate_name(name: str) -> str:
    return f"covariate[{name}]"


def surrogate_name(lag: int, label: str) -> str:
    return f"surrogate[{lag},{label}]"


def interaction_name(lag: int, label: str) -> str:
    return f"interaction[{lag},{label}]"


def _check_arms(panel: Panel) -> None:
    controls, treated = panel.arm_counts()
    if controls == 0 or treated == 0:
        error_msg = (
            f"Both arms need subjects to identify the treatment path "
            f"(controls={controls}, treated={treated})"
        )
        raise DataError(error_msg)


def _covariate_values(panel: Panel, covariates: Sequence[str]) -> list[np.ndarray]:
    unknown = [name for name in covariates if name not in panel.covariates]
    if unknown:
        error_msg = f"Unknown covariates: {', '.join(unknown)}"
        raise ConfigurationError(error_msg)
    return [panel.covariates[name] for name in covariates]


def _check_obs_variance(obs_variance: tuple[float, float]) -> tuple[float, float]:
    if len(obs_variance) != 2 or min(obs_variance) <= 0:
        error_msg = f"Observation variances must be two positive values: {obs_variance}"
        raise ConfigurationError(error_msg)
    return float(obs_variance[0]), float(obs_variance[1])


def _prior(
    panel: Panel,
    layout: StateLayout,
    prior: PriorConfig,
    obs_variance: tuple[float, float],
) -> PriorSpec:
    mean_y, sd_y = panel.outcome_scale()
    variance_y = sd_y**2
    if variance_y == 0.0:
        logger.warning("Observed outcomes have zero variance; prior uses unit scale")
        variance_y = 1.0
    mean_v = float(np.mean(obs_variance))
    mean = np.zeros(layout.shared_dim)
    mean[layout.index(INTERCEPT)] = mean_y
    return PriorSpec(
        mean=mean,
        shared_variance=np.full(layout.shared_dim, prior.kappa * variance_y * mean_v),
        level_variance=prior.level_scale * mean_v,
    )


def _groups(names: list[str]) -> tuple[tuple[str, tuple[int, ...]], ...]:
    prefixes = (
        ("intercept", INTERCEPT),
        ("treatment", TREATMENT),
        ("surrogate", "surrogate["),
        ("interaction", "interaction["),
        ("covariates", "covariate["),
    )
    groups = []
    for group, prefix in prefixes:
        indices = tuple(k for k, name in enumerate(names) if name.startswith(prefix))
        if indices:
            groups.append((group, indices))
    return tuple(groups)


def build_marginal(
    panel: Panel,
    covariates: Sequence[str] = (),
    discounts: DiscountConfig | None = None,
    *,
    prior: PriorConfig | None = None,
    obs_variance: tuple[float, float] = (1.0, 1.0),
) -> ModelSpec:
    """Marginal model with design row ``[1, G_i, x_i]`` plus the subject level.

    Args:
        panel: Observed panel
        covariates: Baseline covariate names
        discounts: Discount factors; covariate coefficients default to static
        prior: Prior scale settings
        obs_variance: Observation variance per arm

    Returns:
        The marginal model specification

    Raises:
        ConfigurationError: If a covariate is unknown
        DataError: If an arm has no subjects
    """
    covariates = tuple(covariates)
    values = _covariate_values(panel, covariates)
    _check_arms(panel)
    obs_variance = _check_obs_variance(obs_variance)

    names = [INTERCEPT, TREATMENT] + [covariate_name(c) for c in covariates]
    layout = StateLayout(tuple(names), _groups(names), panel.n_subjects)
    rows = np.zeros((panel.n_subjects, panel.n_times, layout.shared_dim))
    rows[:, :, 0] = 1.0
    rows[:, :, 1] = panel.arms[:, np.newaxis]
    for k, column in enumerate(values):
        rows[:, :, 2 + k] = column[:, np.newaxis]

    spec = ModelSpec(
        tag=MARGINAL,
        layout=layout,
        subject_ids=panel.subject_ids,
        arms=panel.arms.copy(),
        rows=rows,
        usable=panel.outcome_observed,
        contrast_rows=np.zeros_like(rows),
        contrast_mask=np.zeros(rows.shape[:2], dtype=bool),
        discounts=(discounts or DiscountConfig()).with_defaults(covariates=1.0),
        prior=_prior(panel, layout, prior or PriorConfig(), obs_variance),
        obs_variance=obs_variance,
        covariates=covariates,
    )
    logger.info(
        "Built marginal model: %d shared states, %d subjects, %d usable cells",
        layout.shared_dim,
        panel.n_subjects,
        int(spec.usable.sum()),
    )
    return spec


def _lagged(values: np.ndarray, lag: int) -> np.ndarray:
    lagged = np.full_like(values, np.nan)
    lagged[:, lag:] = values[:, : values.shape[1] - lag]
    return lagged


def build_conditional(
    panel: Panel,
    config: ConditionalConfig,
    discounts: DiscountConfig | None = None,
    *,
    prior: PriorConfig | None = None,
    obs_variance: tuple[float, float] = (1.0, 1.0),
) -> ModelSpec:
    """Conditional model with surrogate lags ``0..K``.

    At time ``t`` only lags ``h <= t`` enter; earlier lags leave their columns at
    zero. A cell is usable when its outcome and every lag it references are
    observed; other observed outcomes are dropped and counted.

    Args:
        panel: Observed panel
        config: Lag, basis, covariate and interaction settings
        discounts: Discount factors; covariate coefficients default to static
        prior: Prior scale settings
        obs_variance: Observation variance per arm

    Returns:
        The conditional model specification

    Raises:
        ConfigurationError: If ``K > T`` or a covariate is unknown
        DataError: If an arm has no subjects or every cell is dropped
    """
    if config.max_lag > panel.horizon:
        error_msg = (
            f"Maximum lag {config.max_lag} exceeds the last time index {panel.horizon}"
        )
        raise ConfigurationError(error_msg)
    values = _covariate_values(panel, config.covariates)
    _check_arms(panel)
    obs_variance = _check_obs_variance(obs_variance)

    basis = config.basis
    labels = basis.column_labels()
    lags = range(config.max_lag + 1)
    names = [INTERCEPT, TREATMENT]
    names += [surrogate_name(h, label) for h in lags for label in labels]
    if config.arm_specific:
        names += [interaction_name(h, label) for h in lags for label in labels]
    names += [covariate_name(c) for c in config.covariates]
    layout = StateLayout(tuple(names), _groups(names), panel.n_subjects)

    n_subjects, n_times = panel.n_subjects, panel.n_times
    rows = np.zeros((n_subjects, n_times, layout.shared_dim))
    contrast_rows = np.zeros_like(rows)
    rows[:, :, 0] = 1.0
    rows[:, :, 1] = panel.arms[:, np.newaxis]
    history = np.ones((n_subjects, n_times), dtype=bool)
    arms = panel.arms[:, np.newaxis, np.newaxis]
    for h in lags:
        columns = design_columns(basis, _lagged(panel.surrogate, h))
        main = [layout.index(surrogate_name(h, label)) for label in labels]
        rows[:, :, main] = columns
        if config.arm_specific:
            interaction = [layout.index(interaction_name(h, label)) for label in labels]
            rows[:, :, interaction] = arms * columns
            contrast_rows[:, :, interaction] = columns
        history[:, h:] &= panel.surrogate_observed[:, : n_times - h]
    for name, column in zip(config.covariates, values, strict=True):
        rows[:, :, layout.index(covariate_name(name))] = column[:, np.newaxis]

    usable = panel.outcome_observed & history
    dropped = int((panel.outcome_observed & ~history).sum())
    if dropped:
        logger.warning(
            "Dropped %d outcome cells lacking surrogate values for lags 0..%d",
            dropped,
            config.max_lag,
        )
    if not usable.any():
        error_msg = "No usable cells remain after dropping incomplete surrogate lags"
        raise DataError(error_msg)

    spec = ModelSpec(
        tag=CONDITIONAL,
        layout=layout,
        subject_ids=panel.subject_ids,
        arms=panel.arms.copy(),
        rows=rows,
        usable=usable,
        contrast_rows=contrast_rows,
        contrast_mask=history,
        discounts=(discounts or DiscountConfig()).with_defaults(covariates=1.0),
        prior=_prior(panel, layout, prior or PriorConfig(), obs_variance),
        obs_variance=obs_variance,
        covariates=tuple(config.covariates),
        conditional=config,
    )
    logger.info(
        "Built conditional model with K=%d: %d shared states, %d usable cells",
        config.max_lag,
        layout.shared_dim,
        int(usable.sum()),
    )
    return spec
