import time

import numpy as np
import pytest

from app.common.errors import ConfigurationError
from app.surrogate.bootstrap import (
    bootstrap_pte,
    decompose,
    draw_indices,
    interval_estimate,
    recombine,
    validity_test,
)
from app.surrogate.design import (
    ConditionalConfig,
    PriorConfig,
    build_conditional,
    build_marginal,
)
from app.surrogate.dlm_core import DiscountConfig, kalman_filter, kalman_smoother
from app.surrogate.estimators import EffectPath, compute_pte
from app.surrogate.models import IntervalEstimate
from app.surrogate.simgen import generate_panel, make_config
from tests.surrogate.oracles import naive_refit

PRIOR = PriorConfig(kappa=10.0)
RESAMPLE = np.array([0, 0, 2, 3, 4, 5, 5, 7])


@pytest.fixture
def marginal_spec(gapped_panel):
    return build_marginal(gapped_panel, prior=PRIOR)


@pytest.fixture
def conditional_spec(gapped_panel):
    return build_conditional(gapped_panel, ConditionalConfig(max_lag=1), prior=PRIOR)


def test_draw_indices_is_deterministic():
    arms = np.repeat([0, 1], 5)
    first = draw_indices(arms, seed=3, replicate=7)
    np.testing.assert_array_equal(first, draw_indices(arms, seed=3, replicate=7))
    assert not np.array_equal(first, draw_indices(arms, seed=3, replicate=8))


def test_stratified_draws_keep_arm_counts():
    arms = np.array([0, 1, 0, 1, 1, 0, 1])
    for replicate in range(20):
        indices = draw_indices(arms, seed=1, replicate=replicate)
        assert indices.tolist() == sorted(indices.tolist())
        assert np.bincount(arms[indices], minlength=2).tolist() == [3, 4]


def test_unstratified_draws_cover_panel_size():
    arms = np.repeat([0, 1], 6)
    indices = draw_indices(arms, seed=0, replicate=0, stratified=False)
    assert indices.size == arms.size
    assert indices.min() >= 0
    assert indices.max() < arms.size


@pytest.mark.parametrize("spec_name", ["marginal_spec", "conditional_spec"])
def test_identity_recombination_matches_full_fit(request, spec_name, gapped_panel):
    spec = request.getfixturevalue(spec_name)
    fit = kalman_smoother(kalman_filter(spec, gapped_panel))
    posterior_set = decompose(spec, gapped_panel)
    paths = recombine(
        posterior_set, np.arange(gapped_panel.n_subjects), with_covariance=True
    )
    np.testing.assert_allclose(paths.means, fit.shared.means, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(
        paths.covariances, fit.shared.covariances, rtol=1e-6, atol=1e-8
    )


def test_joint_recombination_matches_refit(conditional_spec, gapped_panel):
    posterior_set = decompose(conditional_spec, gapped_panel)
    expected = naive_refit(
        conditional_spec, gapped_panel, posterior_set.schedule, RESAMPLE
    )
    paths = recombine(posterior_set, RESAMPLE)
    np.testing.assert_allclose(paths.means, expected, rtol=1e-6, atol=1e-8)


def test_per_time_recombination_is_exact_for_static_states(gapped_panel):
    static = DiscountConfig(shared_discount=1.0, subject_discount=1.0)
    spec = build_marginal(gapped_panel, discounts=static, prior=PRIOR)
    posterior_set = decompose(spec, gapped_panel)
    expected = naive_refit(spec, gapped_panel, posterior_set.schedule, RESAMPLE)
    paths = recombine(posterior_set, RESAMPLE, method="per_time")
    np.testing.assert_allclose(paths.means, expected, rtol=1e-6, atol=1e-8)


def test_joint_falls_back_without_path_cache(marginal_spec, gapped_panel):
    posterior_set = decompose(marginal_spec, gapped_panel, memory_limit=0)
    assert not posterior_set.has_paths
    joint = recombine(posterior_set, RESAMPLE, method="joint")
    per_time = recombine(posterior_set, RESAMPLE, method="per_time")
    np.testing.assert_array_equal(joint.means, per_time.means)


def test_recombine_rejects_bad_input(marginal_spec, gapped_panel):
    posterior_set = decompose(marginal_spec, gapped_panel)
    with pytest.raises(ConfigurationError):
        recombine(posterior_set, [])
    with pytest.raises(ConfigurationError):
        recombine(posterior_set, [0, 99])
    with pytest.raises(ConfigurationError):
        recombine(posterior_set, [0, 1], method="pairwise")


def test_threaded_decomposition_matches_serial(conditional_spec, gapped_panel):
    serial = decompose(conditional_spec, gapped_panel)
    threaded = decompose(conditional_spec, gapped_panel, threads=3)
    np.testing.assert_array_equal(serial.path_precisions, threaded.path_precisions)
    np.testing.assert_array_equal(serial.time_shifts, threaded.time_shifts)


def test_interval_estimate_ignores_undefined_draws():
    draws = np.array([1.0, 2.0, np.nan, 3.0, 4.0])
    estimate = interval_estimate(2.5, draws, level=0.5)
    assert estimate.ci_low == pytest.approx(1.75)
    assert estimate.ci_high == pytest.approx(3.25)
    assert estimate.se == pytest.approx(np.std([1.0, 2.0, 3.0, 4.0], ddof=1))

    empty = interval_estimate(float("nan"), np.full(3, np.nan), level=0.9)
    assert empty.point is None
    assert empty.ci_low is None


def test_validity_test():
    interval = IntervalEstimate(point=0.9, ci_low=0.8, ci_high=1.0, level=0.9)
    assert validity_test(interval, threshold=0.75, alpha=0.05).reject
    assert not validity_test(interval, threshold=0.8, alpha=0.05).reject
    with pytest.raises(ConfigurationError):
        validity_test(interval, threshold=0.75, alpha=0.025)


def test_bootstrap_pte(marginal_spec, conditional_spec, gapped_panel):
    marginal_set = decompose(marginal_spec, gapped_panel)
    conditional_set = decompose(conditional_spec, gapped_panel)
    result = bootstrap_pte(
        marginal_set, conditional_set, gapped_panel, replicates=12, level=0.9, seed=5
    )
    assert result.draws.replicates == 12
    assert result.draws.n_times == gapped_panel.n_times
    assert set(result.per_time) == {"delta", "delta_R", "lpte", "cpte"}
    assert result.pte.level == 0.9

    fit = kalman_smoother(kalman_filter(marginal_spec, gapped_panel))
    np.testing.assert_allclose(
        result.point.delta.values, fit.shared.path("treatment"), rtol=1e-6, atol=1e-8
    )

    again = bootstrap_pte(
        marginal_set,
        conditional_set,
        gapped_panel,
        replicates=12,
        level=0.9,
        seed=5,
        threads=2,
    )
    np.testing.assert_array_equal(result.draws.indices, again.draws.indices)
    np.testing.assert_allclose(result.draws.delta, again.draws.delta)


def test_bootstrap_rejects_mismatched_sets(marginal_spec, gapped_panel, small_panel):
    marginal_set = decompose(marginal_spec, gapped_panel)
    other = decompose(build_marginal(small_panel, prior=PRIOR), small_panel)
    renamed = small_panel.take(range(small_panel.n_subjects), rename=True)
    with pytest.raises(ConfigurationError):
        bootstrap_pte(marginal_set, other, renamed, replicates=2)
    with pytest.raises(ConfigurationError):
        bootstrap_pte(marginal_set, marginal_set, gapped_panel, replicates=0)


def test_bootstrap_reports_given_point(marginal_spec, conditional_spec, gapped_panel):
    marginal_set = decompose(marginal_spec, gapped_panel)
    conditional_set = decompose(conditional_spec, gapped_panel)
    point = compute_pte(
        EffectPath(np.array([0.5, 1.0, 1.5]), "delta"),
        EffectPath(np.array([0.1, 0.2, 0.3]), "delta_R"),
    )
    result = bootstrap_pte(
        marginal_set, conditional_set, gapped_panel, replicates=4, point=point
    )
    assert result.point is point
    assert result.pte.point == point.pte

    short = compute_pte(
        EffectPath(np.ones(2), "delta"), EffectPath(np.ones(2), "delta_R")
    )
    with pytest.raises(ConfigurationError, match="Point estimate"):
        bootstrap_pte(
            marginal_set, conditional_set, gapped_panel, replicates=4, point=short
        )


def _seconds_per_time(horizon, replicates=40):
    panel, _ = generate_panel(make_config(n_per_arm=100, horizon=horizon, W=0.05))
    spec = build_conditional(panel, ConditionalConfig(max_lag=1), prior=PRIOR)
    posterior_set = decompose(spec, panel)
    draws = [draw_indices(panel.arms, seed=1, replicate=b) for b in range(replicates)]
    recombine(posterior_set, draws[0], method="per_time")
    start = time.perf_counter()
    for indices in draws:
        recombine(posterior_set, indices, method="per_time")
    return (time.perf_counter() - start) / (replicates * panel.n_times)


@pytest.mark.slow
def test_recombination_cost_per_time_does_not_grow_with_horizon():
    short = min(_seconds_per_time(10) for _ in range(3))
    long = min(_seconds_per_time(40) for _ in range(3))
    assert long <= 2.0 * short
