from logging import getLogger

import numpy as np

from app.surrogate.design.panel import Panel
from app.surrogate.models import PanelReport

logger = getLogger(__name__)

DEFAULT_MIN_PER_ARM = 200


def validate_panel(panel: Panel) -> PanelReport:
    """Check a panel against the input contract without raising.

    The effective count for ``(arm, t)`` is the number of subjects in the arm with
    both outcome and surrogate observed at ``t``.
    """
    outcome_observed = panel.outcome_observed
    both_observed = outcome_observed & panel.surrogate_observed
    any_observed = outcome_observed | panel.surrogate_observed
    empty_times = np.flatnonzero(~any_observed.any(axis=0)).tolist()
    controls, treated = panel.arm_counts()
    observed_outcomes = panel.outcome[outcome_observed]
    finite = bool(
        np.isfinite(observed_outcomes).all()
        and np.isfinite(panel.surrogate[panel.surrogate_observed]).all()
    )

    report = PanelReport(
        n_subjects=panel.n_subjects,
        n_times=panel.n_times,
        controls=controls,
        treated=treated,
        observations_per_time=outcome_observed.sum(axis=0).tolist(),
        effective_controls=both_observed[panel.arms == 0].sum(axis=0).tolist(),
        effective_treated=both_observed[panel.arms == 1].sum(axis=0).tolist(),
        empty_times=empty_times,
        grid_regular=not empty_times,
        finite=finite,
        both_arms=controls > 0 and treated > 0,
        distinct_outcomes=np.unique(observed_outcomes).size >= 2,
    )
    if not report.passed:
        logger.warning(
            "Panel checks failed: grid_regular=%s finite=%s both_arms=%s "
            "distinct_outcomes=%s",
            report.grid_regular,
            report.finite,
            report.both_arms,
            report.distinct_outcomes,
        )
    return report


def max_supported_lag(
    report: PanelReport, min_per_arm: int = DEFAULT_MIN_PER_ARM
) -> int | None:
    """Latest time at which both arms keep ``min_per_arm`` effective observations.

    Returns:
        The time index, or None if no time reaches the threshold
    """
    supported = [
        t
        for t, (n0, n1) in enumerate(
            zip(report.effective_controls, report.effective_treated, strict=True)
        )
        if n0 >= min_per_arm and n1 >= min_per_arm
    ]
    return max(supported) if supported else None
