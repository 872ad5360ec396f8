from typing import Any

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Provenance of one command invocation."""

    command: str = Field(..., description="CLI subcommand")
    run_id: str = Field(..., description="Run id shared by all log records")
    config: dict[str, Any] = Field(
        default_factory=dict, description="Effective configuration snapshot"
    )
    inputs: dict[str, str] = Field(
        default_factory=dict, description="sha256 digests of input files"
    )
    outputs: list[str] = Field(default_factory=list, description="Files written")
    seed: int | None = None
    version: str
    timings: dict[str, float] = Field(
        default_factory=dict, description="Wall-clock seconds per phase"
    )
    timestamp: str = Field(..., description="UTC time the run finished")
