"""
Result emission: versioned JSON documents and plot-ready CSV tables.

Floats are written with 17 significant digits so every value reads back
bitwise. Undefined values are ``null`` in JSON and empty cells in CSV, next to a
flag column.
"""

import json
import math
from logging import getLogger
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel

from app.common.errors import ConfigurationError
from app.surrogate.cli.ingest import COVARIATE_PREFIX
from app.surrogate.design import Panel
from app.surrogate.models import (
    BenchmarkReport,
    BootstrapReport,
    FitReport,
    HomogeneityReport,
    LagSweepReport,
    PteReport,
    TruthRecord,
)

logger = getLogger(__name__)

FLOAT_FORMAT = ".17g"
BOOTSTRAP_COLUMNS = ["t", "quantity", "estimate", "se", "ci_low", "ci_high"]


def format_float(value: float) -> str | None:
    """17-significant-digit text of a finite float; None otherwise."""
    if not math.isfinite(value):
        return None
    return format(value, FLOAT_FORMAT)


def _encode(value: Any, indent: int, depth: int) -> str:
    pad = "\n" + " " * (indent * (depth + 1))
    close = "\n" + " " * (indent * depth)
    if isinstance(value, np.generic):
        value = value.item()
    if value is None or value is True or value is False:
        return json.dumps(value)
    if isinstance(value, float):
        text = format_float(value)
        return "null" if text is None else text
    if isinstance(value, int | str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{json.dumps(str(key))}: {_encode(item, indent, depth + 1)}"
            for key, item in value.items()
        ]
        return "{" + pad + ("," + pad).join(items) + close + "}"
    if isinstance(value, list | tuple):
        if not value:
            return "[]"
        items = [_encode(item, indent, depth + 1) for item in value]
        return "[" + pad + ("," + pad).join(items) + close + "]"
    error_msg = f"Cannot serialize {type(value).__name__} to JSON"
    raise TypeError(error_msg)


def to_json(document: BaseModel, indent: int = 2) -> str:
    """Serialize a report with 17-significant-digit floats."""
    return _encode(document.model_dump(mode="python"), indent, 0) + "\n"


def write_json(document: BaseModel, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(to_json(document), encoding="utf-8")
    logger.info("Wrote %s", path)
    return path


def write_csv(frame: pd.DataFrame, path: str | Path) -> Path:
    path = Path(path)
    frame.to_csv(path, index=False, float_format="%" + FLOAT_FORMAT, na_rep="")
    logger.info("Wrote %s", path)
    return path


def emit_results(
    results: BaseModel | pd.DataFrame,
    fmt: Literal["json", "csv"],
    path: str | Path,
) -> Path:
    """Write a report document as JSON or a table as CSV.

    Raises:
        ConfigurationError: If the result type does not fit the format
        OSError: If the path is not writable
    """
    if fmt == "json" and isinstance(results, BaseModel):
        return write_json(results, path)
    if fmt == "csv" and isinstance(results, pd.DataFrame):
        return write_csv(results, path)
    if fmt == "csv" and isinstance(results, BaseModel):
        return write_csv(table(results), path)
    error_msg = f"Cannot emit {type(results).__name__} as {fmt}"
    raise ConfigurationError(error_msg)


def panel_to_frame(panel: Panel) -> pd.DataFrame:
    """Long-format rows, one per subject and time, in the ingestion schema."""
    n_times = panel.n_times
    frame = pd.DataFrame(
        {
            "subject_id": [s for s in panel.subject_ids for _ in range(n_times)],
            "time": list(range(n_times)) * panel.n_subjects,
            "arm": panel.arms.repeat(n_times),
            "outcome": panel.outcome.ravel(),
            "surrogate": panel.surrogate.ravel(),
        }
    )
    for name, values in panel.covariates.items():
        frame[COVARIATE_PREFIX + name] = values.repeat(n_times)
    return frame


def _flags(values: list[bool]) -> list[int]:
    return [int(v) for v in values]


def pte_frame(report: PteReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": report.t,
            "delta": report.delta,
            "delta_r": report.delta_r,
            "lpte": report.lpte,
            "cpte": report.cpte,
            "lpte_undefined": _flags(report.lpte_undefined),
            "cpte_undefined": _flags(report.cpte_undefined),
        }
    )


def truth_frame(record: TruthRecord) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": range(len(record.delta)),
            "delta": record.delta,
            "delta_r": record.delta_r,
            "lpte": record.lpte,
            "cpte": record.cpte,
        }
    )


def fit_frame(report: FitReport) -> pd.DataFrame:
    """One row per time and state path."""
    rows = [
        {"t": t, "state": name, "mean": mean, "variance": report.variances[name][t]}
        for name, path in report.paths.items()
        for t, mean in enumerate(path)
    ]
    return pd.DataFrame(rows, columns=["t", "state", "mean", "variance"])


def bootstrap_frame(report: BootstrapReport) -> pd.DataFrame:
    """One row per time and quantity, plus a global PTE row with an empty ``t``."""
    rows = [
        {
            "t": t,
            "quantity": quantity,
            "estimate": estimate.point,
            "se": estimate.se,
            "ci_low": estimate.ci_low,
            "ci_high": estimate.ci_high,
        }
        for quantity, estimates in report.per_time.items()
        for t, estimate in enumerate(estimates)
    ]
    rows.append(
        {
            "t": None,
            "quantity": "pte",
            "estimate": report.pte.point,
            "se": report.pte.se,
            "ci_low": report.pte.ci_low,
            "ci_high": report.pte.ci_high,
        }
    )
    return pd.DataFrame(rows, columns=BOOTSTRAP_COLUMNS)


def homogeneity_frame(report: HomogeneityReport) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "t": range(len(report.delta_diff)),
            "delta_diff": report.delta_diff,
            "sigma": report.sigma,
            "standardized": [d / s for d, s in zip(report.delta_diff, report.sigma)],
        }
    )


def lag_sweep_frame(report: LagSweepReport) -> pd.DataFrame:
    return pd.DataFrame(
        [row.model_dump() for row in report.rows],
        columns=["max_lag", "pte", "ci_low", "ci_high", "msd_p_value"],
    )


def benchmark_frame(report: BenchmarkReport) -> pd.DataFrame:
    return pd.DataFrame([row.model_dump() for row in report.rows])


TABLES = {
    PteReport: pte_frame,
    TruthRecord: truth_frame,
    FitReport: fit_frame,
    BootstrapReport: bootstrap_frame,
    HomogeneityReport: homogeneity_frame,
    LagSweepReport: lag_sweep_frame,
    BenchmarkReport: benchmark_frame,
}


def table(report: BaseModel) -> pd.DataFrame:
    """Plot-ready table of a report."""
    try:
        return TABLES[type(report)](report)
    except KeyError as e:
        error_msg = f"No table layout for {type(report).__name__}"
        raise ConfigurationError(error_msg) from e
