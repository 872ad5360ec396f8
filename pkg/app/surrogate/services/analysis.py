"""
Analysis pipelines shared by the command line and the benchmark harness.
"""

from dataclasses import dataclass, field, replace
from logging import getLogger

from app.common.errors import ConfigurationError, NumericalError
from app.config import SurrogateConfig, config
from app.surrogate.bootstrap import (
    BootstrapResult,
    RecombinationMethod,
    bootstrap_pte,
    decompose,
)
from app.surrogate.design import (
    ConditionalConfig,
    ModelSpec,
    Panel,
    PriorConfig,
    build_conditional,
    build_marginal,
    max_supported_lag,
    validate_panel,
)
from app.surrogate.dlm_core import (
    DiscountConfig,
    FilterTrace,
    SmoothedFit,
    kalman_filter,
    kalman_smoother,
)
from app.surrogate.estimators import (
    DEFAULT_DENOMINATOR_TOLERANCE,
    PteResult,
    compute_pte,
    denominator_eps,
    estimate_delta,
    estimate_delta_R,
)
from app.surrogate.homogeneity import DiffPath, delta_diff, msd_test, wald_test
from app.surrogate.models import LagSweepReport, LagSweepRow, TestResult

logger = getLogger(__name__)


@dataclass(frozen=True)
class AnalysisSettings:
    """Model and resampling settings of one analysis."""

    conditional: ConditionalConfig = field(default_factory=ConditionalConfig)
    discounts: DiscountConfig = field(default_factory=DiscountConfig)
    prior: PriorConfig = field(default_factory=PriorConfig)
    obs_variance: tuple[float, float] = (1.0, 1.0)
    denominator_tolerance: float = DEFAULT_DENOMINATOR_TOLERANCE
    threads: int = 1
    method: RecombinationMethod = "joint"
    memory_limit: int | None = None

    @classmethod
    def from_config(
        cls, settings: SurrogateConfig = config, **overrides
    ) -> "AnalysisSettings":
        """Defaults taken from the application settings."""
        values = {
            "discounts": DiscountConfig(
                shared_discount=settings.shared_discount,
                subject_discount=settings.subject_discount,
            ),
            "prior": PriorConfig(
                kappa=settings.prior_kappa, level_scale=settings.level_prior_scale
            ),
            "denominator_tolerance": settings.denominator_tolerance,
            "threads": settings.threads,
            "memory_limit": settings.joint_memory_limit,
        }
        return cls(**(values | overrides))

    def with_lag(self, max_lag: int) -> "AnalysisSettings":
        return replace(self, conditional=replace(self.conditional, max_lag=max_lag))


@dataclass(frozen=True, eq=False)
class FittedModels:
    """Both working models fitted to one panel.

    ``eps_denom`` is the undefined-ratio guard in outcome units.
    """

    panel: Panel
    settings: AnalysisSettings
    marginal_spec: ModelSpec
    conditional_spec: ModelSpec
    marginal_trace: FilterTrace
    conditional_trace: FilterTrace
    marginal_fit: SmoothedFit
    conditional_fit: SmoothedFit
    eps_denom: float


def fit_models(panel: Panel, settings: AnalysisSettings | None = None) -> FittedModels:
    """Build, filter and smooth the marginal and conditional models."""
    settings = settings or AnalysisSettings()
    marginal_spec = build_marginal(
        panel,
        settings.conditional.covariates,
        settings.discounts,
        prior=settings.prior,
        obs_variance=settings.obs_variance,
    )
    conditional_spec = build_conditional(
        panel,
        settings.conditional,
        settings.discounts,
        prior=settings.prior,
        obs_variance=settings.obs_variance,
    )
    logger.info("Fitting marginal and conditional models")
    marginal_trace = kalman_filter(marginal_spec, panel)
    conditional_trace = kalman_filter(conditional_spec, panel)
    models = FittedModels(
        panel=panel,
        settings=settings,
        marginal_spec=marginal_spec,
        conditional_spec=conditional_spec,
        marginal_trace=marginal_trace,
        conditional_trace=conditional_trace,
        marginal_fit=kalman_smoother(marginal_trace),
        conditional_fit=kalman_smoother(conditional_trace),
        eps_denom=denominator_eps(panel, settings.denominator_tolerance),
    )
    logger.info(
        "Finished fitting %d subjects over %d times", panel.n_subjects, panel.n_times
    )
    return models


def estimate_pte(models: FittedModels) -> PteResult:
    """Plug-in effect paths and PTE estimands of fitted models."""
    delta = estimate_delta(models.marginal_fit)
    delta_R = estimate_delta_R(models.conditional_fit, models.panel)
    return compute_pte(delta, delta_R, models.eps_denom)


def run_bootstrap(
    models: FittedModels,
    replicates: int,
    level: float = 0.95,
    seed: int = 0,
    *,
    stratified: bool = True,
) -> BootstrapResult:
    """Decompose both fits once and run the paired recombination bootstrap.

    The reported point estimate is the plug-in value of the full smoothed fit,
    whatever the recombination method.
    """
    settings = models.settings
    marginal_set = decompose(
        models.marginal_spec,
        models.panel,
        models.marginal_trace.schedule,
        settings.threads,
        settings.memory_limit,
    )
    conditional_set = decompose(
        models.conditional_spec,
        models.panel,
        models.conditional_trace.schedule,
        settings.threads,
        settings.memory_limit,
    )
    return bootstrap_pte(
        marginal_set,
        conditional_set,
        models.panel,
        replicates,
        level,
        seed,
        stratified=stratified,
        method=settings.method,
        eps_denom=models.eps_denom,
        threads=settings.threads,
        point=estimate_pte(models),
    )


def run_homogeneity(
    result: BootstrapResult,
    alpha: float = 0.05,
    n_null_draws: int = 10_000,
    seed: int = 0,
    *,
    wald: bool = False,
    fixed_tau: bool = False,
) -> tuple[DiffPath, TestResult, TestResult | None]:
    """MSD test, and optionally the Wald comparator, from bootstrap draws."""
    diff = delta_diff(
        result.point.delta_R,
        result.point.delta,
        result.draws,
        eps_denom=result.point.eps,
    )
    msd = msd_test(
        diff, result.draws, alpha, n_null_draws, seed, fixed_tau=fixed_tau
    )
    return diff, msd, wald_test(diff, result.draws, alpha) if wald else None


def lag_cap(panel: Panel, min_per_arm: int) -> int | None:
    """Largest lag the panel supports with ``min_per_arm`` subjects per arm."""
    return max_supported_lag(validate_panel(panel), min_per_arm)


def lag_sweep(
    panel: Panel,
    settings: AnalysisSettings,
    max_lag: int,
    *,
    min_per_arm: int = 200,
    replicates: int = 0,
    level: float = 0.95,
    seed: int = 0,
    alpha: float = 0.05,
    n_null_draws: int = 10_000,
) -> LagSweepReport:
    """PTE for every maximum lag ``K = 0..K_max``.

    ``K_max`` is the smallest of ``max_lag``, the last time index and the lag
    the panel supports with ``min_per_arm`` subjects per arm. With replicates
    the table adds percentile intervals and MSD p-values. Rows are descriptive;
    no multiplicity adjustment is applied.
    """
    if max_lag < 0:
        error_msg = f"Maximum lag must be non-negative, got {max_lag}"
        raise ConfigurationError(error_msg)
    cap = lag_cap(panel, min_per_arm)
    top = min(max_lag, panel.horizon)
    if cap is None:
        logger.warning(
            "No time keeps %d subjects per arm; sweeping lags without a cap",
            min_per_arm,
        )
    else:
        top = min(top, cap)

    rows = []
    for k in range(top + 1):
        logger.info("Lag sweep: K=%d of %d", k, top)
        models = fit_models(panel, settings.with_lag(k))
        point = estimate_pte(models)
        row = LagSweepRow(
            max_lag=k, pte=None if point.pte_undefined else point.pte
        )
        if replicates:
            result = run_bootstrap(models, replicates, level, seed)
            row.ci_low, row.ci_high = result.pte.ci_low, result.pte.ci_high
            try:
                _, msd, _ = run_homogeneity(result, alpha, n_null_draws, seed)
                row.msd_p_value = msd.p_value
            except NumericalError as e:
                logger.warning("MSD test skipped at K=%d: %s", k, e)
        rows.append(row)
    return LagSweepReport(lag_cap=cap, rows=rows)

