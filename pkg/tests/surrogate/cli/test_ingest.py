import numpy as np
import pytest

from app.common.errors import DataError
from app.surrogate.cli.ingest import ingest_csv

HEADER = "subject_id,time,arm,outcome,surrogate"


def write(tmp_path, *rows, header=HEADER):
    path = tmp_path / "panel.csv"
    path.write_text("\n".join([header, *rows]) + "\n", encoding="utf-8")
    return path


def test_reads_written_panel_exactly(panel_csv, simulated_panel):
    expected, _ = simulated_panel
    panel = ingest_csv(panel_csv)
    assert panel.subject_ids == expected.subject_ids
    np.testing.assert_array_equal(panel.arms, expected.arms)
    np.testing.assert_array_equal(panel.outcome, expected.outcome)
    np.testing.assert_array_equal(panel.surrogate, expected.surrogate)


def test_missing_cells_and_times(tmp_path):
    path = write(
        tmp_path,
        "b,0,1,1.5,0.2",
        "b,2,1,,0.4",
        "a,0,0,1.0,",
        "a,1,0,1.1,0.3",
    )
    panel = ingest_csv(path)
    assert panel.subject_ids == ("a", "b")
    assert panel.arms.tolist() == [0, 1]
    assert panel.n_times == 3
    observed = panel.outcome_observed.tolist()
    assert observed == [[True, True, False], [True, False, False]]
    assert np.isnan(panel.surrogate[0, 0])
    assert panel.surrogate[1, 2] == 0.4


def test_reads_covariates(tmp_path):
    path = write(
        tmp_path,
        "a,0,0,1.0,0.1,40",
        "a,1,0,1.2,0.2,40",
        "b,0,1,2.0,0.3,55",
        header=HEADER + ",x_age",
    )
    panel = ingest_csv(path)
    assert panel.covariates["age"].tolist() == [40.0, 55.0]


@pytest.mark.parametrize(
    ("rows", "header", "message"),
    [
        (("a,0,0,1.0",), "subject_id,time,arm,outcome", "lacks columns: surrogate"),
        (("a,0,0,1.0,0.1", "a,0,0,1.1,0.2"), HEADER, "Row 3: duplicate entry"),
        (("a,0,0,1.0,0.1", "a,1,1,1.1,0.2"), HEADER, "Arm varies"),
        (("a,1.5,0,1.0,0.1",), HEADER, "Row 2, column 'time'"),
        (("a,0,2,1.0,0.1",), HEADER, "column 'arm'"),
        (("a,0,0,high,0.1",), HEADER, "cannot parse 'high'"),
        (("a,,0,1.0,0.1",), HEADER, "value required"),
        ((), HEADER, "has no rows"),
    ],
)
def test_rejects_invalid_files(tmp_path, rows, header, message):
    path = write(tmp_path, *rows, header=header)
    with pytest.raises(DataError, match=message):
        ingest_csv(path)


def test_rejects_varying_covariate(tmp_path):
    path = write(
        tmp_path,
        "a,0,0,1.0,0.1,40",
        "a,1,0,1.2,0.2,41",
        header=HEADER + ",x_age",
    )
    with pytest.raises(DataError, match="x_age"):
        ingest_csv(path)
