from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from logging import getLogger

import numpy as np

from app.common.errors import DataError

logger = getLogger(__name__)


def resampled_ids(
    subject_ids: Sequence[str], indices: Iterable[int]
) -> tuple[str, ...]:
    """Unique ids for a resampled panel: ``<id>#<slot>``."""
    return tuple(f"{subject_ids[j]}#{slot}" for slot, j in enumerate(indices))


@dataclass(frozen=True, eq=False)
class Panel:
    """Observed trial on the regular grid ``t = 0..T``.

    Missing cells hold NaN. Subjects keep the order they were given in; use
    :meth:`from_arrays` for the canonical id-sorted order.

    Args:
        subject_ids: Unique subject identifiers
        arms: Treatment arm per subject (0 control, 1 treated)
        outcome: Outcome matrix of shape ``(N, T + 1)``
        surrogate: Surrogate matrix of shape ``(N, T + 1)``
        covariates: Baseline covariates, one value per subject
    """

    subject_ids: tuple[str, ...]
    arms: np.ndarray
    outcome: np.ndarray
    surrogate: np.ndarray
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        subject_ids = tuple(str(s) for s in self.subject_ids)
        arms = np.asarray(self.arms)
        outcome = np.asarray(self.outcome, dtype=float)
        surrogate = np.asarray(self.surrogate, dtype=float)
        n_subjects = len(subject_ids)

        if len(set(subject_ids)) != n_subjects:
            error_msg = "Subject ids must be unique"
            raise DataError(error_msg)
        if outcome.ndim != 2 or outcome.shape[0] != n_subjects:
            error_msg = f"Outcome must have shape (N, T + 1), got {outcome.shape}"
            raise DataError(error_msg)
        if surrogate.shape != outcome.shape:
            error_msg = (
                f"Surrogate shape {surrogate.shape} differs from outcome shape "
                f"{outcome.shape}"
            )
            raise DataError(error_msg)
        if arms.shape != (n_subjects,) or not np.isin(arms, (0, 1)).all():
            error_msg = "Arms must be one 0/1 indicator per subject"
            raise DataError(error_msg)
        for name, values in (("outcome", outcome), ("surrogate", surrogate)):
            if np.isinf(values).any():
                i, t = np.argwhere(np.isinf(values))[0]
                error_msg = (
                    f"Infinite {name} for subject {subject_ids[i]} at t={t}"
                )
                raise DataError(error_msg)

        covariates = {}
        for name, values in self.covariates.items():
            values = np.asarray(values, dtype=float)
            if values.shape != (n_subjects,) or not np.isfinite(values).all():
                error_msg = f"Covariate '{name}' must be one finite value per subject"
                raise DataError(error_msg)
            covariates[name] = values

        object.__setattr__(self, "subject_ids", subject_ids)
        object.__setattr__(self, "arms", arms.astype(int))
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "surrogate", surrogate)
        object.__setattr__(self, "covariates", covariates)

    @classmethod
    def from_arrays(
        cls,
        subject_ids: Sequence[str],
        arms: Sequence[int],
        outcome: np.ndarray,
        surrogate: np.ndarray,
        covariates: Mapping[str, Sequence[float]] | None = None,
    ) -> Panel:
        """Build a panel in canonical order (sorted by subject id)."""
        order = np.argsort(np.asarray([str(s) for s in subject_ids]), kind="stable")
        return cls(
            subject_ids=tuple(str(subject_ids[j]) for j in order),
            arms=np.asarray(arms)[order],
            outcome=np.asarray(outcome, dtype=float)[order],
            surrogate=np.asarray(surrogate, dtype=float)[order],
            covariates={
                name: np.asarray(values, dtype=float)[order]
                for name, values in (covariates or {}).items()
            },
        )

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    @property
    def n_times(self) -> int:
        return self.outcome.shape[1]

    @property
    def horizon(self) -> int:
        """Last time index ``T``."""
        return self.n_times - 1

    @property
    def outcome_observed(self) -> np.ndarray:
        return ~np.isnan(self.outcome)

    @property
    def surrogate_observed(self) -> np.ndarray:
        return ~np.isnan(self.surrogate)

    def arm_counts(self) -> tuple[int, int]:
        return int((self.arms == 0).sum()), int((self.arms == 1).sum())

    def subject_index(self, subject_id: str) -> int:
        try:
            return self.subject_ids.index(subject_id)
        except ValueError as e:
            error_msg = f"Subject '{subject_id}' is not in the panel"
            raise DataError(error_msg) from e

    def take(self, indices: Iterable[int], rename: bool = True) -> Panel:
        """Panel of the given subjects in draw order, duplicates allowed.

        Args:
            indices: Subject positions, possibly repeated
            rename: Give every slot a unique ``<id>#<slot>`` id
        """
        indices = np.asarray(list(indices), dtype=int)
        ids = (
            resampled_ids(self.subject_ids, indices)
            if rename
            else tuple(self.subject_ids[j] for j in indices)
        )
        return Panel(
            subject_ids=ids,
            arms=self.arms[indices],
            outcome=self.outcome[indices],
            surrogate=self.surrogate[indices],
            covariates={k: v[indices] for k, v in self.covariates.items()},
        )

    def with_outcome(self, outcome: np.ndarray) -> Panel:
        return replace(self, outcome=np.asarray(outcome, dtype=float))

    def with_surrogate(self, surrogate: np.ndarray) -> Panel:
        return replace(self, surrogate=np.asarray(surrogate, dtype=float))

    def outcome_scale(self) -> tuple[float, float]:
        """Sample mean and standard deviation of the observed outcomes."""
        observed = self.outcome[self.outcome_observed]
        if observed.size == 0:
            error_msg = "Panel has no observed outcomes"
            raise DataError(error_msg)
        sd = float(np.std(observed, ddof=1)) if observed.size > 1 else 0.0
        return float(np.mean(observed)), sd
