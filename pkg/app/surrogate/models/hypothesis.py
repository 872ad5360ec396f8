from typing import ClassVar, Literal

from pydantic import BaseModel, Field


class TestResult(BaseModel):
    """Outcome of a homogeneity test.

    ``reject`` agrees with both ``statistic > critical_value`` and
    ``p_value < alpha``.
    """

    __test__: ClassVar[bool] = False

    method: Literal["msd", "wald"]
    statistic: float
    critical_value: float
    p_value: float = Field(..., ge=0.0, le=1.0)
    alpha: float = Field(..., gt=0.0, lt=1.0)
    draws: int = Field(0, description="Null draws or bootstrap replicates used")
    df: int | None = Field(None, description="Chi-squared degrees of freedom")
    fixed_tau: bool = False

    @property
    def reject(self) -> bool:
        return self.p_value < self.alpha


class HomogeneityReport(BaseModel):
    """Temporal homogeneity of the PTE."""

    schema_version: str = "1"
    manifest: str = "manifest.json"
    tau_hat: float
    delta_diff: list[float]
    sigma: list[float]
    msd: TestResult
    wald: TestResult | None = None
