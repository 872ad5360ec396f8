"""Panel container and working-model builders."""

from app.surrogate.design.basis import SurrogateBasis, basis_expand, design_columns
from app.surrogate.design.builders import (
    INTERCEPT,
    TREATMENT,
    build_conditional,
    build_marginal,
    interaction_name,
    surrogate_name,
)
from app.surrogate.design.panel import Panel, resampled_ids
from app.surrogate.design.spec import (
    CONDITIONAL,
    MARGINAL,
    ConditionalConfig,
    ModelSpec,
    PriorConfig,
    PriorSpec,
)
from app.surrogate.design.validation import max_supported_lag, validate_panel

__all__ = [
    "CONDITIONAL",
    "INTERCEPT",
    "MARGINAL",
    "TREATMENT",
    "ConditionalConfig",
    "ModelSpec",
    "Panel",
    "PriorConfig",
    "PriorSpec",
    "SurrogateBasis",
    "basis_expand",
    "build_conditional",
    "build_marginal",
    "design_columns",
    "interaction_name",
    "max_supported_lag",
    "resampled_ids",
    "surrogate_name",
    "validate_panel",
]
