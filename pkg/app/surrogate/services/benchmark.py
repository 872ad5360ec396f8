"""
Replicated simulation study comparing the state-space estimator with the
per-time OLS and endpoint-difference baselines.
"""

from collections import defaultdict
from collections.abc import Sequence
from logging import getLogger

import numpy as np

from app.common.errors import ConfigurationError, DataError, NumericalError
from app.surrogate.bootstrap import BootstrapResult, interval_estimate, validity_test
from app.surrogate.comparators import bootstrap_baseline, diff_pte, ols_pte
from app.surrogate.models import BenchmarkReport, BenchmarkRow, IntervalEstimate
from app.surrogate.services.analysis import (
    AnalysisSettings,
    fit_models,
    run_bootstrap,
    run_homogeneity,
)
from app.surrogate.simgen import GenConfig, analytic_truth, generate_panel

logger = getLogger(__name__)

METHODS = ("ssm", "ols", "diff")
NOT_IMPLEMENTED = ("gee", "lmm")
PANEL_STREAM, BOOTSTRAP_STREAM, NULL_STREAM = 0, 1, 2


def replication_seed(seed: int, replication: int, stream: int = PANEL_STREAM) -> int:
    """Independent seed of one replication for the panel, bootstrap or null stream."""
    entropy = [seed, replication, stream]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


class _Tally:
    def __init__(self):
        self.estimates: list[float] = []
        self.covered: list[bool] = []
        self.rejected: list[bool] = []
        self.msd: list[bool] = []
        self.wald: list[bool] = []

    def add(
        self,
        intervals: tuple[IntervalEstimate, IntervalEstimate],
        truth: float | None,
        threshold: float,
        alpha: float,
    ) -> None:
        coverage, validity = intervals
        if coverage.point is None:
            return
        self.estimates.append(coverage.point)
        bounds = (coverage.ci_low, coverage.ci_high)
        if truth is not None and None not in bounds:
            self.covered.append(bounds[0] <= truth <= bounds[1])
        self.rejected.append(validity_test(validity, threshold, alpha).reject)


def _rate(values: list[bool]) -> float | None:
    return float(np.mean(values)) if values else None


def _intervals(
    point: float, draws: np.ndarray, level: float, alpha: float
) -> tuple[IntervalEstimate, IntervalEstimate]:
    return (
        interval_estimate(point, draws, level),
        interval_estimate(point, draws, 1.0 - 2.0 * alpha),
    )


def _tally_homogeneity(
    tally: _Tally, boot: BootstrapResult, alpha: float, n_null_draws: int, seed: int
) -> None:
    try:
        _, msd, wald = run_homogeneity(boot, alpha, n_null_draws, seed, wald=True)
    except NumericalError as e:
        logger.warning("Homogeneity tests skipped: %s", e)
        return
    tally.msd.append(msd.reject)
    tally.wald.append(wald.reject)


def run_benchmark(
    config: GenConfig,
    replications: int,
    replicates: int,
    *,
    setting: str = "custom",
    settings: AnalysisSettings | None = None,
    methods: Sequence[str] = METHODS,
    seed: int = 0,
    level: float = 0.95,
    threshold: float = 0.75,
    alpha: float = 0.05,
    homogeneity: bool = False,
    n_null_draws: int = 10_000,
) -> BenchmarkReport:
    """Bias, empirical SE, coverage and rejection rates over replications.

    Every replication simulates a fresh trial from ``config`` with its own seed.
    The validity test uses the ``1 - 2 * alpha`` interval of the same draws.
    With ``homogeneity`` the state-space rows add MSD and Wald rejection rates.

    Args:
        config: Generator configuration; ``n_per_arm`` sets the sample size
        replications: Number of simulated trials
        replicates: Bootstrap replicates per trial
        setting: Label of the setting in the report
        settings: Analysis settings of the state-space fits
        methods: Subset of ``ssm``, ``ols`` and ``diff``
        seed: Base seed of the study
        level: Confidence level of the coverage intervals
        threshold: PTE threshold of the validity test
        alpha: Level of the validity and homogeneity tests
        homogeneity: Whether to run the homogeneity tests
        n_null_draws: Null draws of the MSD test

    Returns:
        One row per method, plus rows marking the unavailable baselines
    """
    unknown = set(methods) - set(METHODS)
    if unknown:
        error_msg = f"Unknown benchmark methods: {sorted(unknown)}"
        raise ConfigurationError(error_msg)
    settings = settings or AnalysisSettings()
    truth = analytic_truth(config).pte
    tallies: dict[str, _Tally] = defaultdict(_Tally)

    for r in range(replications):
        panel, _ = generate_panel(
            config.model_copy(update={"seed": replication_seed(seed, r)})
        )
        boot_seed = replication_seed(seed, r, BOOTSTRAP_STREAM)
        if r % 10 == 0:
            logger.info(
                "Benchmark %s: replication %d of %d", setting, r + 1, replications
            )

        if "ssm" in methods:
            try:
                models = fit_models(panel, settings)
                boot = run_bootstrap(models, replicates, level, seed=boot_seed)
                intervals = _intervals(boot.point.pte, boot.draws.pte, level, alpha)
                tallies["ssm"].add(intervals, truth, threshold, alpha)
            except (DataError, NumericalError) as e:
                logger.warning("Replication %d: state-space estimate failed: %s", r, e)
                boot = None
            if homogeneity and boot is not None:
                _tally_homogeneity(
                    tallies["ssm"],
                    boot,
                    alpha,
                    n_null_draws,
                    replication_seed(seed, r, NULL_STREAM),
                )

        for name, estimator in (("ols", ols_pte), ("diff", diff_pte)):
            if name not in methods:
                continue
            try:
                result = bootstrap_baseline(
                    panel, estimator, replicates, level, seed=boot_seed
                )
            except (DataError, NumericalError) as e:
                logger.warning("Replication %d: %s estimate failed: %s", r, name, e)
                continue
            intervals = _intervals(result.pte, result.draws, level, alpha)
            tallies[name].add(intervals, truth, threshold, alpha)

    rows = []
    for name in methods:
        tally = tallies[name]
        estimates = np.asarray(tally.estimates)
        rows.append(
            BenchmarkRow(
                method=name,
                setting=setting,
                n_per_arm=config.n_per_arm,
                replications=replications,
                true_pte=truth,
                bias=(
                    float(estimates.mean() - truth)
                    if estimates.size and truth is not None
                    else None
                ),
                empirical_se=(
                    float(estimates.std(ddof=1)) if estimates.size > 1 else None
                ),
                coverage=_rate(tally.covered),
                rejection_rate=_rate(tally.rejected),
                msd_rejection_rate=_rate(tally.msd),
                wald_rejection_rate=_rate(tally.wald),
            )
        )
    rows += [
        BenchmarkRow(
            method=name,
            setting=setting,
            n_per_arm=config.n_per_arm,
            replications=0,
            status="not implemented",
            true_pte=truth,
        )
        for name in NOT_IMPLEMENTED
    ]
    return BenchmarkReport(rows=rows)
