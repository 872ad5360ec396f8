import numpy as np

from app.surrogate.design import max_supported_lag, validate_panel


def test_validate_panel_counts(gapped_panel):
    report = validate_panel(gapped_panel)
    assert report.passed
    assert (report.controls, report.treated) == (4, 4)
    assert report.observations_per_time == [7, 7, 7]
    assert report.effective_controls == [4, 3, 4]
    assert report.effective_treated == [3, 4, 3]


def test_validate_panel_flags_empty_time(small_panel):
    outcome = small_panel.outcome.copy()
    surrogate = small_panel.surrogate.copy()
    outcome[:, 1] = np.nan
    surrogate[:, 1] = np.nan
    report = validate_panel(small_panel.with_outcome(outcome).with_surrogate(surrogate))
    assert report.empty_times == [1]
    assert not report.grid_regular
    assert not report.passed


def test_validate_panel_flags_constant_outcome(small_panel):
    report = validate_panel(small_panel.with_outcome(np.ones_like(small_panel.outcome)))
    assert not report.distinct_outcomes


def test_max_supported_lag(gapped_panel):
    report = validate_panel(gapped_panel)
    assert max_supported_lag(report, 4) is None
    assert max_supported_lag(report, 3) == 2
    report.effective_controls[2] = 2
    assert max_supported_lag(report, 3) == 1
