"""
Result documents written by the command line.

Every document carries a schema version and names the manifest written next to
it; timestamps only live in the manifest.
"""

from typing import Any, Literal

from pydantic import BaseModel, Field

from app.surrogate.models.intervals import IntervalEstimate, ValidityDecision
from app.surrogate.models.panel_report import DominanceReport, PanelReport


class TruthRecord(BaseModel):
    """True effect paths implied by a generator configuration."""

    method: Literal["analytic", "monte-carlo"]
    delta: list[float]
    delta_r: list[float]
    lpte: list[float | None]
    cpte: list[float | None]
    pte: float | None


class FitReport(BaseModel):
    schema_version: str = "1"
    manifest: str = "manifest.json"
    model: dict[str, Any]
    paths: dict[str, list[float]]
    variances: dict[str, list[float]]


class PteReport(BaseModel):
    """Plug-in effect paths and PTE estimands."""

    schema_version: str = "1"
    manifest: str = "manifest.json"
    t: list[int]
    delta: list[float]
    delta_r: list[float]
    lpte: list[float | None]
    cpte: list[float | None]
    lpte_undefined: list[bool]
    cpte_undefined: list[bool]
    pte: float | None
    contrast_imputed: list[int] = Field(
        default_factory=list,
        description="Times whose control average reused another time's controls",
    )
    marginal: dict[str, Any] = Field(default_factory=dict)
    conditional: dict[str, Any] = Field(default_factory=dict)
    panel: PanelReport | None = None
    dominance: DominanceReport | None = None


class BootstrapReport(BaseModel):
    """Recombination bootstrap summary."""

    schema_version: str = "1"
    manifest: str = "manifest.json"
    replicates: int
    level: float
    seed: int
    stratified: bool
    method: Literal["joint", "per_time"]
    undefined_replicates: int
    unreliable: bool
    pte: IntervalEstimate
    per_time: dict[str, list[IntervalEstimate]]
    validity: ValidityDecision | None = None


class LagSweepRow(BaseModel):
    max_lag: int
    pte: float | None
    ci_low: float | None = None
    ci_high: float | None = None
    msd_p_value: float | None = None


class LagSweepReport(BaseModel):
    """PTE against the maximum surrogate lag, reported without multiplicity
    adjustment."""

    schema_version: str = "1"
    manifest: str = "manifest.json"
    lag_cap: int | None
    rows: list[LagSweepRow]


class BenchmarkRow(BaseModel):
    method: Literal["ssm", "ols", "diff", "gee", "lmm"]
    setting: str
    n_per_arm: int
    replications: int
    status: Literal["ok", "not implemented"] = "ok"
    true_pte: float | None = None
    bias: float | None = None
    empirical_se: float | None = None
    coverage: float | None = None
    rejection_rate: float | None = None
    msd_rejection_rate: float | None = None
    wald_rejection_rate: float | None = None


class BenchmarkReport(BaseModel):
    schema_version: str = "1"
    manifest: str = "manifest.json"
    rows: list[BenchmarkRow]
