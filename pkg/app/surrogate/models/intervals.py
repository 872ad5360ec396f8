from pydantic import BaseModel, Field, model_validator


class IntervalEstimate(BaseModel):
    """Point estimate with bootstrap SE and percentile interval."""

    point: float | None = Field(..., description="Point estimate; null if undefined")
    se: float | None = Field(None, description="Standard deviation of the draws")
    ci_low: float | None = Field(None, description="Lower percentile bound")
    ci_high: float | None = Field(None, description="Upper percentile bound")
    level: float = Field(..., gt=0.0, lt=1.0, description="Confidence level")

    @model_validator(mode="after")
    def check_bounds(self):
        if (
            self.ci_low is not None
            and self.ci_high is not None
            and self.ci_low > self.ci_high
        ):
            error_msg = f"ci_low {self.ci_low} exceeds ci_high {self.ci_high}"
            raise ValueError(error_msg)
        return self


class ValidityDecision(BaseModel):
    """One-sided test of H0: PTE <= threshold via the interval's lower bound."""

    threshold: float
    alpha: float
    level: float
    ci_low: float | None
    reject: bool = Field(..., description="True declares a strong surrogate")

    @property
    def conclusion(self) -> str:
        if self.reject:
            return f"strong surrogate: lower bound exceeds {self.threshold}"
        return f"not shown to exceed {self.threshold}"
