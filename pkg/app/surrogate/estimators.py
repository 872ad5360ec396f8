"""
Plug-in estimands from fitted working models.

``delta`` is the marginal treatment path, ``delta_R`` the residual treatment
effect of the conditional model averaged over the control surrogate histories,
and the local, cumulative and global PTE follow from their ratios.
"""

from dataclasses import dataclass
from logging import getLogger
from typing import Literal

import numpy as np
from scipy import stats

from app.common.errors import ConfigurationError, DataError, NumericalError
from app.surrogate.design import TREATMENT, ModelSpec, Panel
from app.surrogate.dlm_core import SmoothedFit
from app.surrogate.models import DominanceReport, DominanceRow

logger = getLogger(__name__)

DEFAULT_DENOMINATOR_EPS = 1e-8
DEFAULT_DENOMINATOR_TOLERANCE = 1e-8
MIN_DOMINANCE_OBSERVATIONS = 5


@dataclass(frozen=True, eq=False)
class EffectPath:
    """Effect values over ``t = 0..T`` in outcome units.

    Args:
        values: Effect per time
        label: ``delta``, ``delta_R`` or ``delta_diff``
        flagged: Times whose value relied on an imputed control set
    """

    values: np.ndarray
    label: Literal["delta", "delta_R", "delta_diff"]
    flagged: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            error_msg = f"Effect path must be a non-empty vector, got {values.shape}"
            raise ConfigurationError(error_msg)
        if not np.isfinite(values).all():
            error_msg = f"Effect path '{self.label}' has non-finite entries"
            raise NumericalError(error_msg)
        flagged = (
            np.zeros(values.size, dtype=bool)
            if self.flagged is None
            else np.asarray(self.flagged, dtype=bool)
        )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "flagged", flagged)

    @property
    def n_times(self) -> int:
        return self.values.size

    @property
    def area(self) -> float:
        return float(self.values.sum())


@dataclass(frozen=True, eq=False)
class PteResult:
    """Local, cumulative and global PTE.

    Undefined ratios hold NaN and are flagged; estimates are not clamped.
    """

    delta: EffectPath
    delta_R: EffectPath
    lpte: np.ndarray
    cpte: np.ndarray
    lpte_undefined: np.ndarray
    cpte_undefined: np.ndarray
    denominators: np.ndarray
    eps: float

    @property
    def pte(self) -> float:
        return float(self.cpte[-1])

    @property
    def pte_undefined(self) -> bool:
        return bool(self.cpte_undefined[-1])


def denominator_eps(
    panel: Panel, tolerance: float = DEFAULT_DENOMINATOR_TOLERANCE
) -> float:
    """Undefined-ratio guard in outcome units: ``tolerance`` times the SD of Y.

    A panel with constant outcomes falls back to ``tolerance`` itself.
    """
    _, sd = panel.outcome_scale()
    return tolerance * sd if sd > 0.0 else tolerance


def estimate_delta(marginal_fit: SmoothedFit) -> EffectPath:
    """Treatment effect path ``delta(t)`` from the smoothed marginal model.

    Raises:
        ConfigurationError: If the fit is not marginal or has no treatment path
    """
    if not marginal_fit.spec.is_marginal:
        error_msg = f"Expected a marginal fit, got '{marginal_fit.tag}'"
        raise ConfigurationError(error_msg)
    return EffectPath(marginal_fit.shared.path(TREATMENT).copy(), "delta")


def residual_contrast(
    spec: ModelSpec,
    coefficients: np.ndarray,
    weights: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Control average of ``f_t^(1) - f_t^(0)`` at each time.

    Controls whose surrogate history is available at ``t`` contribute with their
    weight (their multiplicity in a resample). When no control qualifies, the
    histories of the nearest earlier time with controls are used, else the
    nearest later one.

    Args:
        spec: Conditional model specification
        coefficients: Shared-state values per time, shape ``(T + 1, p)``
        weights: Non-negative weight per subject; ones by default

    Returns:
        Contrast per time and a flag per time marking imputed control sets

    Raises:
        DataError: If no control has a surrogate history at any time
    """
    n_subjects, n_times, _ = spec.contrast_rows.shape
    contrast = np.zeros(n_times)
    imputed = np.zeros(n_times, dtype=bool)
    if spec.conditional is None or not spec.conditional.arm_specific:
        return contrast, imputed

    weights = np.ones(n_subjects) if weights is None else np.asarray(weights, float)
    control_weights = np.where(spec.arms == 0, weights, 0.0)
    available = control_weights[:, np.newaxis] * spec.contrast_mask
    totals = available.sum(axis=0)
    with_controls = np.flatnonzero(totals > 0)
    if with_controls.size == 0:
        error_msg = "No control subject has a surrogate history at any time"
        raise DataError(error_msg)

    for t in range(n_times):
        source = t
        if totals[t] == 0:
            earlier = with_controls[with_controls < t]
            source = int(earlier[-1] if earlier.size else with_controls[0])
            imputed[t] = True
        histories = spec.contrast_rows[:, source] @ coefficients[t]
        contrast[t] = available[:, source] @ histories / totals[source]
    return contrast, imputed


def estimate_delta_R(
    conditional_fit: SmoothedFit,
    panel: Panel,
    weights: np.ndarray | None = None,
) -> EffectPath:
    """Residual treatment effect path from the smoothed conditional model.

    ``delta_R(t)`` is the treatment coefficient plus the control average of the
    treatment-specific surrogate contrast.

    Args:
        conditional_fit: Smoothed conditional fit
        panel: Panel the fit was built on
        weights: Optional per-subject weights for the control average

    Raises:
        ConfigurationError: If the fit is not conditional or the panel differs
    """
    spec = conditional_fit.spec
    if spec.is_marginal:
        error_msg = "Expected a conditional fit, got 'marginal'"
        raise ConfigurationError(error_msg)
    if tuple(panel.subject_ids) != tuple(spec.subject_ids):
        error_msg = "Panel subjects do not match the conditional fit"
        raise ConfigurationError(error_msg)
    contrast, imputed = residual_contrast(spec, conditional_fit.shared.means, weights)
    if imputed.any():
        logger.warning(
            "No controls with surrogate history at t=%s; reused nearby control sets",
            np.flatnonzero(imputed).tolist(),
        )
    values = conditional_fit.shared.path(TREATMENT) + contrast
    return EffectPath(values, "delta_R", imputed)


def compute_pte(
    delta: EffectPath,
    delta_R: EffectPath,
    eps_denom: float = DEFAULT_DENOMINATOR_EPS,
) -> PteResult:
    """Local, cumulative and global PTE from the two effect paths.

    Args:
        delta: Treatment effect path
        delta_R: Residual treatment effect path
        eps_denom: Denominators smaller than this in magnitude are undefined

    Returns:
        The PTE result; ``pte`` equals the last cumulative value

    Raises:
        ConfigurationError: If the paths differ in length
    """
    if delta.n_times != delta_R.n_times:
        error_msg = (
            f"Effect paths differ in length: {delta.n_times} vs {delta_R.n_times}"
        )
        raise ConfigurationError(error_msg)

    lpte_undefined = np.abs(delta.values) < eps_denom
    safe_delta = np.where(lpte_undefined, 1.0, delta.values)
    lpte = np.where(lpte_undefined, np.nan, 1.0 - delta_R.values / safe_delta)

    cumulative = np.cumsum(delta.values)
    cumulative_residual = np.cumsum(delta_R.values)
    cpte_undefined = np.abs(cumulative) < eps_denom
    safe_cumulative = np.where(cpte_undefined, 1.0, cumulative)
    cpte = np.where(
        cpte_undefined, np.nan, 1.0 - cumulative_residual / safe_cumulative
    )
    if cpte_undefined.any():
        logger.debug("Cumulative PTE undefined at t=%s", np.flatnonzero(cpte_undefined))
    return PteResult(
        delta=delta,
        delta_R=delta_R,
        lpte=lpte,
        cpte=cpte,
        lpte_undefined=lpte_undefined,
        cpte_undefined=cpte_undefined,
        denominators=cumulative,
        eps=eps_denom,
    )


def check_surrogate_dominance(panel: Panel, alpha: float = 0.05) -> DominanceReport:
    """Marginal check that treated surrogates dominate control surrogates.

    At each time the statistic is ``max_s F1(s) - F0(s)`` over the pooled values;
    positive values point to a violation and the one-sided two-sample KS test
    flags it at level ``alpha``.
    """
    report = DominanceReport()
    observed = panel.surrogate_observed
    for t in range(panel.n_times):
        control = panel.surrogate[(panel.arms == 0) & observed[:, t], t]
        treated = panel.surrogate[(panel.arms == 1) & observed[:, t], t]
        if min(control.size, treated.size) < MIN_DOMINANCE_OBSERVATIONS:
            logger.info(
                "Skipping dominance check at t=%d: %d controls, %d treated",
                t,
                control.size,
                treated.size,
            )
            report.skipped.append(t)
            continue
        grid = np.unique(np.concatenate([control, treated]))
        cdf_treated = np.searchsorted(np.sort(treated), grid, side="right")
        cdf_control = np.searchsorted(np.sort(control), grid, side="right")
        cdf_treated = cdf_treated / treated.size
        cdf_control = cdf_control / control.size
        statistic = float(np.max(cdf_treated - cdf_control))
        p_value = float(stats.ks_2samp(treated, control, alternative="greater").pvalue)
        report.rows.append(
            DominanceRow(
                t=t,
                statistic=statistic,
                p_value=p_value,
                n_control=control.size,
                n_treated=treated.size,
                flagged=p_value < alpha,
            )
        )
    if report.any_flagged:
        logger.warning(
            "Surrogate dominance flagged at t=%s",
            [row.t for row in report.rows if row.flagged],
        )
    return report
