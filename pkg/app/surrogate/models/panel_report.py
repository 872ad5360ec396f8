"""
Models for panel validation and the dominance diagnostic.
"""

from pydantic import BaseModel, Field


class PanelReport(BaseModel):
    """Input checks on a panel, with per-arm effective sample sizes."""

    n_subjects: int = Field(..., description="Number of subjects")
    n_times: int = Field(..., description="Number of grid points T + 1")
    controls: int = Field(..., description="Number of control subjects")
    treated: int = Field(..., description="Number of treated subjects")
    observations_per_time: list[int] = Field(
        ..., description="Observed outcomes per time point"
    )
    effective_controls: list[int] = Field(
        ...,
        description="Controls with both outcome and surrogate observed, per time",
    )
    effective_treated: list[int] = Field(
        ...,
        description="Treated subjects with both outcome and surrogate observed, "
        "per time",
    )
    empty_times: list[int] = Field(
        default_factory=list, description="Grid points without any observation"
    )
    grid_regular: bool = Field(..., description="Every grid point carries data")
    finite: bool = Field(..., description="All present values are finite")
    both_arms: bool = Field(..., description="Each arm has at least one subject")
    distinct_outcomes: bool = Field(
        ..., description="At least two distinct outcome values are observed"
    )

    @property
    def passed(self) -> bool:
        return (
            self.grid_regular
            and self.finite
            and self.both_arms
            and self.distinct_outcomes
        )


class DominanceRow(BaseModel):
    """Marginal dominance statistic at one time point."""

    t: int
    statistic: float = Field(
        ..., description="max over s of F1(s) - F0(s) on the pooled grid"
    )
    p_value: float = Field(..., description="One-sided two-sample KS p-value")
    n_control: int
    n_treated: int
    flagged: bool = Field(..., description="Dominance rejected at the 5% level")


class DominanceReport(BaseModel):
    """Per-time marginal check that treated surrogates dominate control ones.

    The check compares marginal distributions of the surrogate only; it is not a
    test of the history-conditional assumption.
    """

    label: str = "marginal (not history-conditional) surrogate dominance check"
    rows: list[DominanceRow] = Field(default_factory=list)
    skipped: list[int] = Field(
        default_factory=list,
        description="Times skipped because an arm had fewer than 5 surrogates",
    )

    @property
    def any_flagged(self) -> bool:
        return any(row.flagged for row in self.rows)
