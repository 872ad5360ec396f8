import numpy as np
import pytest

from app.common.errors import DegenerateVarianceError, NumericalError
from app.surrogate.bootstrap import BootstrapDraws
from app.surrogate.estimators import EffectPath
from app.surrogate.homogeneity import delta_diff, msd_test, wald_statistic, wald_test

DELTA = np.array([1.0, 1.0, 1.0])


def make_draws(delta, delta_R, replicates=200, scale=0.05, seed=0):
    """Bootstrap draws scattered around the given paths."""
    rng = np.random.default_rng(seed)
    n_times = len(delta)
    deltas = delta + rng.normal(scale=scale, size=(replicates, n_times))
    delta_Rs = delta_R + rng.normal(scale=scale, size=(replicates, n_times))
    empty = np.full((replicates, n_times), np.nan)
    pte = np.zeros(replicates)
    return BootstrapDraws(
        seed=seed,
        stratified=True,
        indices=np.zeros((replicates, 4), dtype=int),
        delta=deltas,
        delta_R=delta_Rs,
        lpte=empty,
        cpte=empty,
        pte=pte,
        undefined=np.zeros(replicates, dtype=bool),
    )


def paths(delta, delta_R):
    return EffectPath(np.asarray(delta), "delta"), EffectPath(
        np.asarray(delta_R), "delta_R"
    )


def test_delta_diff_sums_to_zero():
    delta, delta_R = paths([1.0, 2.0, 0.5], [0.2, 1.5, 0.1])
    diff = delta_diff(delta_R, delta, make_draws(delta.values, delta_R.values))
    assert diff.values.sum() == pytest.approx(0.0, abs=1e-12)
    assert diff.tau_hat == pytest.approx(1.0 - 1.8 / 3.5)
    assert (diff.sigma > 0).all()


def test_delta_diff_needs_defined_pte():
    delta, delta_R = paths([1.0, -1.0], [0.5, 0.5])
    with pytest.raises(NumericalError):
        delta_diff(delta_R, delta, make_draws(delta.values, delta_R.values))


def test_delta_diff_rejects_zero_spread():
    delta, delta_R = paths(DELTA, 0.5 * DELTA)
    draws = make_draws(DELTA, 0.5 * DELTA, scale=0.0)
    with pytest.raises(DegenerateVarianceError):
        delta_diff(delta_R, delta, draws)


def test_msd_accepts_homogeneous_paths():
    delta, delta_R = paths(DELTA, 0.5 * DELTA)
    draws = make_draws(DELTA, 0.5 * DELTA)
    diff = delta_diff(delta_R, delta, draws)
    result = msd_test(diff, draws, n_null_draws=2000, seed=1)
    assert result.statistic == pytest.approx(0.0, abs=1e-12)
    assert result.p_value == 1.0
    assert not result.reject


def test_msd_rejects_front_loaded_mediation():
    delta, delta_R = paths(DELTA, [1.5, 0.0, 0.0])
    draws = make_draws(DELTA, delta_R.values)
    diff = delta_diff(delta_R, delta, draws)
    result = msd_test(diff, draws, n_null_draws=2000, seed=1)
    assert result.reject
    assert result.statistic > result.critical_value
    assert 0.0 <= result.p_value < 0.05


@pytest.mark.parametrize("fixed_tau", [False, True])
def test_msd_is_reproducible(fixed_tau):
    delta, delta_R = paths([1.0, 1.2, 0.8], [0.6, 0.4, 0.5])
    draws = make_draws(delta.values, delta_R.values, scale=0.2)
    diff = delta_diff(delta_R, delta, draws)
    first = msd_test(diff, draws, n_null_draws=500, seed=4, fixed_tau=fixed_tau)
    second = msd_test(diff, draws, n_null_draws=500, seed=4, fixed_tau=fixed_tau)
    assert first == second
    assert first.reject == (first.statistic > first.critical_value)


def test_single_time_is_trivially_homogeneous():
    delta, delta_R = paths([1.0], [0.4])
    draws = make_draws(delta.values, delta_R.values)
    diff = delta_diff(delta_R, delta, draws)
    assert msd_test(diff, draws).p_value == 1.0
    assert wald_test(diff, draws).df == 0


def test_wald_statistic_projects_onto_contrasts():
    values = np.array([1.0, -2.0, 4.0])
    statistic, rank = wald_statistic(values, np.eye(3))
    centered = values - values.mean()
    assert rank == 2
    assert statistic == pytest.approx(centered @ centered)


def test_wald_test_rejects_heterogeneity():
    delta, delta_R = paths(DELTA, [1.5, 0.0, 0.0])
    draws = make_draws(DELTA, delta_R.values)
    result = wald_test(delta_diff(delta_R, delta, draws), draws)
    assert result.df == 2
    assert result.reject


def test_wald_test_singular_covariance():
    delta, delta_R = paths(DELTA, [1.5, 0.0, 0.0])
    draws = make_draws(DELTA, delta_R.values)
    proportional = BootstrapDraws(
        seed=0,
        stratified=True,
        indices=draws.indices,
        delta=draws.delta,
        delta_R=0.5 * draws.delta,
        lpte=draws.lpte,
        cpte=draws.cpte,
        pte=draws.pte,
        undefined=draws.undefined,
    )
    diff = delta_diff(delta_R, delta, draws)
    with pytest.raises(NumericalError):
        wald_test(diff, proportional)


@pytest.mark.parametrize("scale", [1e-9, 1e9])
def test_msd_is_unchanged_by_outcome_units(scale):
    delta, delta_R = np.array([1.0, 1.2, 0.8]), np.array([0.6, 0.4, 0.5])
    results = []
    for factor in (1.0, scale):
        effect, residual = paths(factor * delta, factor * delta_R)
        draws = make_draws(effect.values, residual.values, scale=0.2 * factor)
        diff = delta_diff(residual, effect, draws, eps_denom=1e-8 * factor)
        assert diff.eps == 1e-8 * factor
        results.append(msd_test(diff, draws, n_null_draws=500, seed=4))
    base, scaled = results
    assert scaled.statistic == pytest.approx(base.statistic, rel=1e-9)
    assert scaled.p_value == pytest.approx(base.p_value)
    assert scaled.reject == base.reject
