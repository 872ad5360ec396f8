"""
Long-format panel CSV ingestion.

One row per ``(subject_id, time)`` with columns ``subject_id``, ``time``, ``arm``,
``outcome`` and ``surrogate``, plus baseline covariates prefixed ``x_``. Empty
cells are missing values.
"""

from logging import getLogger
from pathlib import Path

import numpy as np
import pandas as pd

from app.common.errors import DataError
from app.surrogate.design import Panel

logger = getLogger(__name__)

REQUIRED_COLUMNS = ("subject_id", "time", "arm", "outcome", "surrogate")
COVARIATE_PREFIX = "x_"


def _csv_row(index: int) -> int:
    """File line of a frame row, counting the header as line 1."""
    return int(index) + 2


def _numeric(frame: pd.DataFrame, column: str) -> pd.Series:
    # Exact decimal parsing: emitted files read back bitwise.
    raw = frame[column]
    values = np.full(len(raw), np.nan)
    for position, (index, text) in enumerate(raw.items()):
        if pd.isna(text):
            continue
        try:
            values[position] = float(text)
        except ValueError as e:
            error_msg = (
                f"Row {_csv_row(index)}, column '{column}': cannot parse "
                f"{text!r} as a number"
            )
            raise DataError(error_msg) from e
    return pd.Series(values, index=raw.index)


def _check_required(frame: pd.DataFrame, column: str) -> None:
    missing = frame[column].isna()
    if missing.any():
        row = _csv_row(missing.idxmax())
        error_msg = f"Row {row}, column '{column}': value required"
        raise DataError(error_msg)


def ingest_csv(path: str | Path) -> Panel:
    """Read a long-format panel.

    Args:
        path: UTF-8 CSV file with a header row

    Returns:
        The panel over times ``0..max(time)``, sorted by subject id

    Raises:
        DataError: If a column is missing, a value is invalid, a
            ``(subject_id, time)`` pair repeats, an arm or covariate varies
            within a subject, or the file cannot be parsed
    """
    path = Path(path)
    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_values=[""],
            encoding="utf-8",
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        error_msg = f"Cannot parse panel file {path}: {e}"
        raise DataError(error_msg) from e

    missing_columns = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing_columns:
        error_msg = f"Panel file {path} lacks columns: {', '.join(missing_columns)}"
        raise DataError(error_msg)
    if frame.empty:
        error_msg = f"Panel file {path} has no rows"
        raise DataError(error_msg)

    for column in ("subject_id", "time", "arm"):
        _check_required(frame, column)
    time = _numeric(frame, "time")
    bad_time = (time < 0) | (time != np.floor(time))
    if bad_time.any():
        index = bad_time.idxmax()
        error_msg = (
            f"Row {_csv_row(index)}, column 'time': expected a non-negative "
            f"integer, got {frame['time'][index]!r}"
        )
        raise DataError(error_msg)
    arm = _numeric(frame, "arm")
    bad_arm = ~arm.isin((0, 1))
    if bad_arm.any():
        index = bad_arm.idxmax()
        error_msg = (
            f"Row {_csv_row(index)}, column 'arm': expected 0 or 1, "
            f"got {frame['arm'][index]!r}"
        )
        raise DataError(error_msg)

    data = pd.DataFrame(
        {
            "subject_id": frame["subject_id"],
            "time": time.astype(int),
            "arm": arm.astype(int),
            "outcome": _numeric(frame, "outcome"),
            "surrogate": _numeric(frame, "surrogate"),
        }
    )
    duplicated = data.duplicated(["subject_id", "time"])
    if duplicated.any():
        index = duplicated.idxmax()
        error_msg = (
            f"Row {_csv_row(index)}: duplicate entry for subject "
            f"{data['subject_id'][index]!r} at time {data['time'][index]}"
        )
        raise DataError(error_msg)

    subjects = data.groupby("subject_id", sort=True)
    varying_arm = subjects["arm"].nunique() > 1
    if varying_arm.any():
        error_msg = f"Arm varies within subject {varying_arm.idxmax()!r}"
        raise DataError(error_msg)

    covariates = {}
    for column in (c for c in frame.columns if c.startswith(COVARIATE_PREFIX)):
        values = _numeric(frame, column)
        _check_required(frame, column)
        per_subject = values.groupby(data["subject_id"], sort=True)
        varying = per_subject.nunique() > 1
        if varying.any():
            error_msg = (
                f"Covariate column '{column}' varies within subject "
                f"{varying.idxmax()!r}"
            )
            raise DataError(error_msg)
        covariates[column.removeprefix(COVARIATE_PREFIX)] = per_subject.first()

    subject_ids = list(subjects.groups)
    n_times = int(data["time"].max()) + 1
    outcome = (
        data.pivot(index="subject_id", columns="time", values="outcome")
        .reindex(index=subject_ids, columns=range(n_times))
        .to_numpy(dtype=float)
    )
    surrogate = (
        data.pivot(index="subject_id", columns="time", values="surrogate")
        .reindex(index=subject_ids, columns=range(n_times))
        .to_numpy(dtype=float)
    )
    panel = Panel.from_arrays(
        subject_ids,
        subjects["arm"].first().loc[subject_ids].to_numpy(),
        outcome,
        surrogate,
        {k: v.loc[subject_ids].to_numpy() for k, v in covariates.items()},
    )
    logger.info(
        "Ingested %d subjects over %d times from %s",
        panel.n_subjects,
        panel.n_times,
        path,
    )
    return panel
