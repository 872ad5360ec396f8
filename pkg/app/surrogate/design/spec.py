from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field, replace

import numpy as np

from app.common.errors import ConfigurationError, DataError
from app.surrogate.design.basis import SurrogateBasis
from app.surrogate.design.panel import resampled_ids
from app.surrogate.dlm_core.types import DiscountConfig, StateLayout

MARGINAL = "marginal"
CONDITIONAL = "conditional"


@dataclass(frozen=True)
class PriorConfig:
    """Scale settings for the initial prior.

    Shared states get variance ``kappa * var(Y) * mean(V)``; subject levels get
    ``level_scale * mean(V)``.
    """

    kappa: float = 1e6
    level_scale: float = 1.0

    def __post_init__(self):
        if self.kappa <= 0 or self.level_scale <= 0:
            error_msg = (
                f"Prior scales must be positive (kappa={self.kappa}, "
                f"level_scale={self.level_scale})"
            )
            raise ConfigurationError(error_msg)


@dataclass(frozen=True, eq=False)
class PriorSpec:
    """Materialized prior: shared means and variances, common level variance."""

    mean: np.ndarray
    shared_variance: np.ndarray
    level_variance: float


@dataclass(frozen=True)
class ConditionalConfig:
    """Settings of the conditional working model.

    Args:
        max_lag: Number of past surrogate values ``K`` entering the outcome
        basis: Basis for each lag's surrogate effect
        covariates: Baseline covariate names
        interaction: Whether to add treatment-by-surrogate terms
    """

    max_lag: int = 0
    basis: SurrogateBasis = field(default_factory=SurrogateBasis)
    covariates: tuple[str, ...] = ()
    interaction: bool = False

    def __post_init__(self):
        if int(self.max_lag) != self.max_lag or self.max_lag < 0:
            error_msg = f"Maximum lag must be a non-negative integer: {self.max_lag}"
            raise ConfigurationError(error_msg)
        object.__setattr__(self, "covariates", tuple(self.covariates))

    @property
    def arm_specific(self) -> bool:
        return self.interaction or self.basis.per_arm


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A fully materialized working model over a specific panel.

    ``rows[i, t]`` is the shared-block design row of cell ``(i, t)``; the
    subject's own level always enters with coefficient 1. ``contrast_rows[i, t]``
    maps the shared states at ``t`` to ``f_t^(1) - f_t^(0)`` evaluated at the
    subject's surrogate history.
    """

    tag: str
    layout: StateLayout
    subject_ids: tuple[str, ...]
    arms: np.ndarray
    rows: np.ndarray
    usable: np.ndarray
    contrast_rows: np.ndarray
    contrast_mask: np.ndarray
    discounts: DiscountConfig
    prior: PriorSpec
    obs_variance: tuple[float, float] = (1.0, 1.0)
    covariates: tuple[str, ...] = ()
    conditional: ConditionalConfig | None = None

    @property
    def n_times(self) -> int:
        return self.rows.shape[1]

    @property
    def is_marginal(self) -> bool:
        return self.tag == MARGINAL

    def observation_variance(self, subject: int) -> float:
        return float(self.obs_variance[int(self.arms[subject])])

    def subject_index(self, subject_id: str) -> int:
        try:
            return self.subject_ids.index(subject_id)
        except ValueError as e:
            error_msg = f"Subject '{subject_id}' is not in the panel"
            raise DataError(error_msg) from e

    def design_row(self, subject: int, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Sparse observation row of cell ``(subject, t)`` over the full state.

        Returns:
            State indices and values, including the subject's level
        """
        row = self.rows[subject, t]
        indices = np.flatnonzero(row)
        return (
            np.append(indices, self.layout.level_index(subject)),
            np.append(row[indices], 1.0),
        )

    def subset(self, indices: Iterable[int], rename: bool | None = None) -> ModelSpec:
        """Model over the given subjects in draw order, keeping the prior.

        Duplicated subjects get unique ``<id>#<slot>`` ids.
        """
        indices = np.asarray(list(indices), dtype=int)
        if rename is None:
            rename = len(set(indices.tolist())) != indices.size
        ids = (
            resampled_ids(self.subject_ids, indices)
            if rename
            else tuple(self.subject_ids[j] for j in indices)
        )
        return replace(
            self,
            layout=self.layout.with_subjects(indices.size),
            subject_ids=ids,
            arms=self.arms[indices],
            rows=self.rows[indices],
            usable=self.usable[indices],
            contrast_rows=self.contrast_rows[indices],
            contrast_mask=self.contrast_mask[indices],
        )

    def describe(self) -> dict[str, object]:
        """Configuration summary recorded alongside fits."""
        summary: dict[str, object] = {
            "tag": self.tag,
            "shared_states": list(self.layout.shared_names),
            "n_subjects": len(self.subject_ids),
            "n_times": self.n_times,
            "shared_discount": self.discounts.shared_discount,
            "subject_discount": self.discounts.subject_discount,
            "discount_overrides": dict(self.discounts.overrides),
            "obs_variance": list(self.obs_variance),
            "level_prior_variance": self.prior.level_variance,
            "covariates": list(self.covariates),
            "usable_cells": int(self.usable.sum()),
        }
        if self.conditional is not None:
            summary["max_lag"] = self.conditional.max_lag
            summary["basis"] = self.conditional.basis.kind
            summary["bin_edges"] = list(self.conditional.basis.edges)
            summary["arm_specific"] = self.conditional.arm_specific
        return summary
