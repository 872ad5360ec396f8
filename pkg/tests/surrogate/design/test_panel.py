import numpy as np
import pytest

from app.common.errors import DataError
from app.surrogate.design import Panel, resampled_ids


def test_from_arrays_sorts_by_subject_id():
    panel = Panel.from_arrays(
        ["b", "a"],
        [1, 0],
        np.array([[2.0, 3.0], [0.0, 1.0]]),
        np.zeros((2, 2)),
        {"age": [40.0, 30.0]},
    )
    assert panel.subject_ids == ("a", "b")
    np.testing.assert_array_equal(panel.arms, [0, 1])
    np.testing.assert_array_equal(panel.outcome[0], [0.0, 1.0])
    np.testing.assert_array_equal(panel.covariates["age"], [30.0, 40.0])
    assert panel.horizon == 1


@pytest.mark.parametrize(
    "kwargs, message",
    [
        ({"subject_ids": ("a", "a")}, "unique"),
        ({"arms": np.array([0, 2])}, "Arms"),
        ({"outcome": np.array([[0.0, np.inf], [0.0, 0.0]])}, "Infinite outcome"),
        ({"surrogate": np.zeros((2, 3))}, "Surrogate shape"),
        ({"covariates": {"age": [1.0]}}, "Covariate 'age'"),
    ],
)
def test_panel_rejects_invalid_input(kwargs, message):
    values = {
        "subject_ids": ("a", "b"),
        "arms": np.array([0, 1]),
        "outcome": np.zeros((2, 2)),
        "surrogate": np.zeros((2, 2)),
    }
    with pytest.raises(DataError, match=message):
        Panel(**(values | kwargs))


def test_take_keeps_duplicates_with_unique_ids(small_panel):
    taken = small_panel.take([0, 0, 5])
    assert taken.subject_ids == resampled_ids(small_panel.subject_ids, [0, 0, 5])
    assert len(set(taken.subject_ids)) == 3
    np.testing.assert_array_equal(taken.outcome[1], small_panel.outcome[0])
    assert small_panel.take([5], rename=False).subject_ids == ("p05",)


def test_outcome_scale_ignores_missing(gapped_panel):
    mean, sd = gapped_panel.outcome_scale()
    observed = gapped_panel.outcome[~np.isnan(gapped_panel.outcome)]
    assert mean == pytest.approx(observed.mean())
    assert sd == pytest.approx(observed.std(ddof=1))


def test_subject_index(small_panel):
    assert small_panel.subject_index("p03") == 3
    with pytest.raises(DataError):
        small_panel.subject_index("nobody")
