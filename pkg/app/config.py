from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SurrogateConfig(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="SURRO_")
    seed: int | None = None
    threads: int = Field(default=1, ge=1)
    log_config: str = "logging.json"
    shared_discount: float = Field(default=0.95, gt=0.0, le=1.0)
    subject_discount: float = Field(default=0.95, gt=0.0, le=1.0)
    prior_kappa: float = Field(default=1e6, gt=0.0)
    level_prior_scale: float = Field(default=1.0, gt=0.0)
    bootstrap_replicates: int = Field(default=500, ge=1)
    null_draws: int = Field(default=10_000, ge=1)
    denominator_tolerance: float = Field(default=1e-8, gt=0.0)
    joint_memory_limit: int = 1 << 30


config = SurrogateConfig()
