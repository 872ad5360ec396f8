import numpy as np
import pytest

from app.common.errors import ConfigurationError
from app.config import SurrogateConfig
from app.surrogate.design import ConditionalConfig, PriorConfig
from app.surrogate.estimators import DEFAULT_DENOMINATOR_TOLERANCE, estimate_delta
from app.surrogate.services.analysis import (
    AnalysisSettings,
    estimate_pte,
    fit_models,
    lag_cap,
    lag_sweep,
    run_bootstrap,
    run_homogeneity,
)
from app.surrogate.simgen import generate_panel, make_config


@pytest.fixture
def models(simulated_panel):
    panel, _ = simulated_panel
    settings = AnalysisSettings(conditional=ConditionalConfig(max_lag=1))
    return fit_models(panel, settings)


def test_settings_from_config():
    settings = AnalysisSettings.from_config(
        SurrogateConfig(shared_discount=0.9, prior_kappa=50.0, threads=3),
        method="per_time",
    )
    assert settings.discounts.shared_discount == 0.9
    assert settings.discounts.subject_discount == 0.95
    assert settings.prior.kappa == 50.0
    assert settings.threads == 3
    assert settings.method == "per_time"
    assert settings.with_lag(2).conditional.max_lag == 2


def test_fit_models(models, simulated_panel):
    panel, _ = simulated_panel
    assert models.marginal_fit.tag == "marginal"
    assert models.conditional_fit.tag == "conditional"
    assert models.conditional_fit.shared.n_times == panel.n_times
    assert "surrogate[1,linear]" in models.conditional_spec.layout


def test_estimate_pte(models):
    result = estimate_pte(models)
    np.testing.assert_array_equal(
        result.delta.values, estimate_delta(models.marginal_fit).values
    )
    assert result.cpte[-1] == result.pte


@pytest.mark.parametrize("method", ["joint", "per_time"])
def test_bootstrap_point_is_the_full_fit(simulated_panel, method):
    panel, _ = simulated_panel
    settings = AnalysisSettings(conditional=ConditionalConfig(max_lag=1), method=method)
    models = fit_models(panel, settings)
    boot = run_bootstrap(models, replicates=8, level=0.9, seed=3)
    point = estimate_pte(models)
    np.testing.assert_array_equal(boot.point.delta.values, point.delta.values)
    np.testing.assert_array_equal(boot.point.delta_R.values, point.delta_R.values)
    assert boot.point.pte == point.pte
    assert boot.pte.point == point.pte
    assert boot.draws.replicates == 8


def test_homogeneity_from_bootstrap(models):
    boot = run_bootstrap(models, replicates=40, seed=1)
    diff, msd, wald = run_homogeneity(boot, n_null_draws=500, seed=2, wald=True)
    assert diff.values.sum() == pytest.approx(0.0, abs=1e-9)
    assert 0.0 <= msd.p_value <= 1.0
    assert wald.df == diff.n_times - 1


def test_lag_sweep_respects_cap(simulated_panel):
    panel, _ = simulated_panel
    assert lag_cap(panel, min_per_arm=5) == panel.horizon
    report = lag_sweep(panel, AnalysisSettings(), max_lag=2, min_per_arm=5)
    assert [row.max_lag for row in report.rows] == [0, 1, 2]
    assert report.lag_cap == panel.horizon
    assert all(row.ci_low is None for row in report.rows)


def test_lag_sweep_without_supported_lag(simulated_panel):
    panel, _ = simulated_panel
    report = lag_sweep(panel, AnalysisSettings(), max_lag=10, min_per_arm=500)
    assert report.lag_cap is None
    assert len(report.rows) == panel.horizon + 1


def test_lag_sweep_with_intervals(simulated_panel):
    panel, _ = simulated_panel
    report = lag_sweep(
        panel,
        AnalysisSettings(),
        max_lag=1,
        min_per_arm=5,
        replicates=10,
        n_null_draws=200,
    )
    assert all(row.ci_low is not None for row in report.rows)
    with pytest.raises(ConfigurationError):
        lag_sweep(panel, AnalysisSettings(), max_lag=-1)


def test_denominator_guard_follows_outcome_spread(models, simulated_panel):
    panel, _ = simulated_panel
    _, sd = panel.outcome_scale()
    assert models.eps_denom == pytest.approx(DEFAULT_DENOMINATOR_TOLERANCE * sd)
    assert estimate_pte(models).eps == models.eps_denom
    loose = fit_models(panel, AnalysisSettings(denominator_tolerance=1e-3))
    assert loose.eps_denom == pytest.approx(1e-3 * sd)


def test_pte_is_insensitive_to_diffuse_prior_scale():
    panel, _ = generate_panel(make_config(n_per_arm=30, horizon=3, W=0.05, seed=13))
    estimates = []
    for kappa in (1e4, 1e6, 1e8):
        settings = AnalysisSettings(
            conditional=ConditionalConfig(max_lag=1), prior=PriorConfig(kappa=kappa)
        )
        estimates.append(estimate_pte(fit_models(panel, settings)).pte)
    assert estimates == pytest.approx([estimates[1]] * 3, abs=1e-3)


@pytest.mark.slow
def test_truncating_lags_does_not_raise_mean_pte():
    differences = []
    for seed in range(100):
        config = make_config(
            n_per_arm=30,
            horizon=3,
            W=0.05,
            beta_lag=0.5,
            h2_kind="custom",
            h2=[1.0] * 4,
            seed=seed,
        )
        panel, _ = generate_panel(config)
        truncated, lagged = (
            estimate_pte(fit_models(panel, AnalysisSettings().with_lag(lag))).pte
            for lag in (0, 1)
        )
        differences.append(lagged - truncated)
    differences = np.asarray(differences)
    margin = 2.0 * differences.std(ddof=1) / np.sqrt(differences.size)
    assert differences.mean() >= -margin
