from dataclasses import replace

import numpy as np
import pytest

from app.common.errors import ConfigurationError
from app.surrogate.design import (
    ConditionalConfig,
    PriorConfig,
    build_conditional,
    build_marginal,
)
from app.surrogate.dlm_core import (
    DiscountConfig,
    GaussianBelief,
    discount_for_retention,
    discount_predict,
    kalman_filter,
    kalman_smoother,
)
from tests.surrogate.oracles import dense_posterior

PRIOR = PriorConfig(kappa=10.0)


def test_discount_for_retention():
    assert discount_for_retention(0.5, 2) == pytest.approx(np.sqrt(0.5))
    assert discount_for_retention(1.0) == 1.0
    with pytest.raises(ConfigurationError):
        discount_for_retention(0.0)
    with pytest.raises(ConfigurationError):
        discount_for_retention(0.5, 0)


def test_discount_predict_inflates_covariance():
    belief = GaussianBelief(np.array([1.0, 2.0]), np.diag([1.0, 4.0]), t=3)
    predicted = discount_predict(belief, DiscountConfig(shared_discount=0.8))
    np.testing.assert_allclose(predicted.covariance, np.diag([1.25, 5.0]))
    np.testing.assert_array_equal(predicted.mean, belief.mean)
    assert predicted.t == 4


def test_discount_predict_checks_layout(small_panel):
    spec = build_marginal(small_panel)
    belief = GaussianBelief(np.zeros(3), np.eye(3))
    with pytest.raises(ConfigurationError, match="Layout dimension"):
        discount_predict(belief, DiscountConfig(), spec.layout)


def test_filter_final_state_matches_dense_posterior(small_panel):
    spec = build_marginal(small_panel, prior=PRIOR)
    trace = kalman_filter(spec, small_panel)
    shared, levels = dense_posterior(spec, small_panel, trace.schedule)
    p = spec.layout.shared_dim
    np.testing.assert_allclose(trace.filtered_means[-1, :p], shared[-1], rtol=1e-6)
    np.testing.assert_allclose(trace.filtered_means[-1, p:], levels[-1], rtol=1e-6)


def test_filter_skips_missing_cells(gapped_panel):
    spec = build_marginal(gapped_panel, prior=PRIOR)
    trace = kalman_filter(spec, gapped_panel)
    np.testing.assert_array_equal(trace.n_observations, [7, 7, 7])
    assert [len(r) for r in trace.residuals] == [7, 7, 7]


def test_filter_records_and_replays_schedule(small_panel):
    spec = build_conditional(small_panel, ConditionalConfig(max_lag=1), prior=PRIOR)
    trace = kalman_filter(spec, small_panel)
    assert np.all(trace.schedule.shared[0] == 0.0)
    assert np.all(trace.schedule.levels[1:] > 0.0)
    replay = kalman_filter(spec, small_panel, schedule=trace.schedule)
    np.testing.assert_allclose(replay.filtered_means, trace.filtered_means)
    np.testing.assert_allclose(replay.filtered_covariances, trace.filtered_covariances)


def test_static_discount_keeps_treatment_constant(small_panel):
    discounts = DiscountConfig(overrides={"treatment": 1.0})
    spec = build_marginal(small_panel, discounts=discounts, prior=PRIOR)
    trace = kalman_filter(spec, small_panel)
    index = spec.layout.index("treatment")
    assert np.all(trace.schedule.shared[:, index, :] == 0.0)


def test_filter_rejects_mismatched_schedule(small_panel):
    spec = build_marginal(small_panel, prior=PRIOR)
    schedule = kalman_filter(spec, small_panel).schedule
    other = build_conditional(small_panel, ConditionalConfig(max_lag=1), prior=PRIOR)
    with pytest.raises(ConfigurationError, match="schedule"):
        kalman_filter(other, small_panel, schedule=schedule)


def test_filter_rejects_other_panel(small_panel):
    spec = build_marginal(small_panel, prior=PRIOR)
    with pytest.raises(ConfigurationError, match="Panel"):
        kalman_filter(spec, small_panel.take([0, 1, 4, 5]))


@pytest.mark.parametrize("conditional", [False, True])
def test_observation_variance_scale_leaves_means_unchanged(small_panel, conditional):
    fits = []
    for obs_variance in ((1.0, 2.0), (7.3, 14.6)):
        if conditional:
            spec = build_conditional(
                small_panel,
                ConditionalConfig(max_lag=1),
                prior=PRIOR,
                obs_variance=obs_variance,
            )
        else:
            spec = build_marginal(small_panel, prior=PRIOR, obs_variance=obs_variance)
        fits.append(kalman_smoother(kalman_filter(spec, small_panel)))
    base, scaled = fits
    np.testing.assert_allclose(
        scaled.shared.means, base.shared.means, rtol=1e-8, atol=1e-10
    )
    np.testing.assert_allclose(
        scaled.level_means, base.level_means, rtol=1e-8, atol=1e-10
    )
    np.testing.assert_allclose(scaled.level_variances, 7.3 * base.level_variances)


def test_later_missing_outcome_leaves_earlier_beliefs_unchanged(small_panel):
    outcome = small_panel.outcome.copy()
    outcome[3, 2] = np.nan
    gapped = small_panel.with_outcome(outcome)
    full_spec = build_marginal(small_panel, prior=PRIOR)
    gapped_spec = replace(build_marginal(gapped, prior=PRIOR), prior=full_spec.prior)

    full = kalman_filter(full_spec, small_panel)
    partial = kalman_filter(gapped_spec, gapped)
    np.testing.assert_array_equal(partial.n_observations, [8, 8, 7])
    np.testing.assert_array_equal(partial.filtered_means[:2], full.filtered_means[:2])
    np.testing.assert_array_equal(
        partial.filtered_covariances[:2], full.filtered_covariances[:2]
    )
    np.testing.assert_array_equal(partial.predicted_means[2], full.predicted_means[2])
    np.testing.assert_array_equal(
        partial.predicted_covariances[2], full.predicted_covariances[2]
    )
    assert not np.array_equal(partial.filtered_means[2], full.filtered_means[2])
