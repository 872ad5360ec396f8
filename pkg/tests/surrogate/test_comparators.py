import numpy as np
import pytest

from app.common.errors import ConfigurationError, DataError
from app.surrogate.comparators import bootstrap_baseline, diff_pte, ols_pte
from app.surrogate.design import Panel
from app.surrogate.simgen import generate_panel, make_config


def _with_outcome(panel, outcome):
    return Panel.from_arrays(panel.subject_ids, panel.arms, outcome, panel.surrogate)


def test_ols_matches_cross_sectional_least_squares(small_panel):
    result = ols_pte(small_panel)
    treated = small_panel.arms == 1
    outcome = small_panel.outcome
    np.testing.assert_allclose(
        result.delta, outcome[treated].mean(axis=0) - outcome[~treated].mean(axis=0)
    )
    for t in range(small_panel.n_times):
        design = np.column_stack(
            [
                np.ones(small_panel.n_subjects),
                small_panel.arms,
                small_panel.surrogate[:, t],
            ]
        )
        coefficients, *_ = np.linalg.lstsq(design, outcome[:, t], rcond=None)
        assert result.delta_R[t] == pytest.approx(coefficients[1])
    assert result.flagged == ()
    assert np.isfinite(result.pte)


def test_ols_flags_times_without_enough_subjects(small_panel):
    outcome = small_panel.outcome.copy()
    outcome[5:, 2] = np.nan
    result = ols_pte(_with_outcome(small_panel, outcome))
    assert result.flagged == (2,)
    assert result.pte_undefined


def test_diff_recovers_change_score_effects(small_panel):
    outcome = small_panel.outcome.copy()
    surrogate_change = small_panel.surrogate[:, -1] - small_panel.surrogate[:, 0]
    shift = 1.0 + 20.0 * small_panel.arms + 0.5 * surrogate_change
    outcome[:, -1] = outcome[:, 0] + shift
    result = diff_pte(_with_outcome(small_panel, outcome))
    treated = small_panel.arms == 1
    expected_delta = 20.0 + 0.5 * (
        surrogate_change[treated].mean() - surrogate_change[~treated].mean()
    )
    assert result.delta[0] == pytest.approx(expected_delta)
    assert result.delta_R[0] == pytest.approx(20.0)
    assert result.pte == pytest.approx(1.0 - 20.0 / expected_delta)
    assert result.delta_se > 0.0
    assert result.dropped == 0


def test_diff_needs_complete_endpoints(small_panel):
    outcome = small_panel.outcome.copy()
    outcome[1:4, -1] = np.nan
    with pytest.raises(DataError):
        diff_pte(_with_outcome(small_panel, outcome))


def test_bootstrap_baseline(simulated_panel):
    panel, _ = simulated_panel
    result = bootstrap_baseline(panel, diff_pte, replicates=10, level=0.9, seed=2)
    again = bootstrap_baseline(panel, diff_pte, replicates=10, level=0.9, seed=2)
    assert result.draws.shape == (10,)
    assert result.interval.level == 0.9
    assert result.pte == diff_pte(panel).pte
    np.testing.assert_array_equal(result.draws, again.draws)
    with pytest.raises(ConfigurationError):
        bootstrap_baseline(panel, diff_pte, replicates=0)


def test_diff_flags_effects_that_return_to_baseline(simulated_panel):
    config = make_config(
        n_per_arm=200, horizon=4, h1_kind="parabola", h2_kind="parabola", seed=5
    )
    panel, truth = generate_panel(config)
    assert truth.delta[-1] == pytest.approx(0.0)
    result = diff_pte(panel)
    assert result.pte_undefined
    assert result.delta_se > 0.0
    assert abs(result.delta[0]) < 3.0 * result.delta_se

    monotone, _ = simulated_panel
    assert not diff_pte(monotone).pte_undefined


@pytest.mark.parametrize("scale", [1e-9, 1e9])
def test_baselines_do_not_depend_on_outcome_units(simulated_panel, scale):
    panel, _ = simulated_panel
    scaled = _with_outcome(panel, scale * panel.outcome)
    for estimator in (ols_pte, diff_pte):
        base, rescaled = estimator(panel), estimator(scaled)
        assert rescaled.pte_undefined == base.pte_undefined
        assert rescaled.pte == pytest.approx(base.pte, rel=1e-6, nan_ok=True)
    assert diff_pte(scaled).delta_se == pytest.approx(scale * diff_pte(panel).delta_se)
