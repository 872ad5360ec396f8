"""
Value types for the replicated-series dynamic linear model.

Shared states (intercept path, treatment path, surrogate and covariate
coefficients) come first in the state vector, followed by one random-walk level
per subject.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from app.common.errors import ConfigurationError

if TYPE_CHECKING:
    from app.surrogate.design.spec import ModelSpec


@dataclass(frozen=True)
class StateLayout:
    """Coordinate layout of the state vector.

    Args:
        shared_names: Names of the shared states, in state order
        groups: Discount groups as ``(group name, shared state indices)`` pairs
        n_subjects: Number of subjects, each owning one level state
    """

    shared_names: tuple[str, ...]
    groups: tuple[tuple[str, tuple[int, ...]], ...]
    n_subjects: int
    _positions: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.shared_names)) != len(self.shared_names):
            error_msg = f"Duplicate state names in layout: {self.shared_names}"
            raise ConfigurationError(error_msg)
        covered = sorted(index for _, indices in self.groups for index in indices)
        if covered != list(range(len(self.shared_names))):
            error_msg = "Discount groups must cover every shared state exactly once"
            raise ConfigurationError(error_msg)
        if self.n_subjects < 0:
            error_msg = "Number of subjects cannot be negative"
            raise ConfigurationError(error_msg)
        positions = {name: index for index, name in enumerate(self.shared_names)}
        object.__setattr__(self, "_positions", positions)

    @property
    def shared_dim(self) -> int:
        return len(self.shared_names)

    @property
    def subject_dim(self) -> int:
        return 1

    @property
    def total_dim(self) -> int:
        return self.shared_dim + self.subject_dim * self.n_subjects

    def __contains__(self, name: str) -> bool:
        return name in self._positions

    def index(self, name: str) -> int:
        """Position of a named shared effect in the state vector."""
        try:
            return self._positions[name]
        except KeyError as e:
            error_msg = f"Layout has no state named '{name}'"
            raise ConfigurationError(error_msg) from e

    def level_index(self, subject: int) -> int:
        """Position of a subject's level in the state vector."""
        return self.shared_dim + subject

    def names_with_prefix(self, prefix: str) -> list[str]:
        return [name for name in self.shared_names if name.startswith(prefix)]

    def group_indices(self, group: str) -> tuple[int, ...]:
        for name, indices in self.groups:
            if name == group:
                return indices
        return ()

    def with_subjects(self, n_subjects: int) -> StateLayout:
        return StateLayout(self.shared_names, self.groups, n_subjects)


@dataclass(frozen=True)
class DiscountConfig:
    """Discount factors for the evolution covariance.

    Args:
        shared_discount: Discount applied to each shared-state group
        subject_discount: Discount applied to each subject level
        overrides: Per-group discounts replacing ``shared_discount``
    """

    shared_discount: float = 0.95
    subject_discount: float = 0.95
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        values = {
            "shared_discount": self.shared_discount,
            "subject_discount": self.subject_discount,
            **{f"overrides[{k}]": v for k, v in self.overrides.items()},
        }
        for name, value in values.items():
            if not 0.0 < value <= 1.0:
                error_msg = f"Discount {name}={value} must lie in (0, 1]"
                raise ConfigurationError(error_msg)

    def for_group(self, group: str) -> float:
        return self.overrides.get(group, self.shared_discount)

    def with_defaults(self, **defaults: float) -> DiscountConfig:
        """Add group discounts that have not been overridden explicitly."""
        merged = {**defaults, **self.overrides}
        return DiscountConfig(self.shared_discount, self.subject_discount, merged)


@dataclass(frozen=True, eq=False)
class GaussianBelief:
    """Gaussian belief over a block of states at one time index."""

    mean: np.ndarray
    covariance: np.ndarray
    t: int | None = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        covariance = np.asarray(self.covariance, dtype=float)
        if covariance.shape != (mean.size, mean.size):
            error_msg = (
                f"Covariance shape {covariance.shape} does not match mean of "
                f"size {mean.size}"
            )
            raise ConfigurationError(error_msg)
        object.__setattr__(self, "mean", mean.reshape(-1))
        object.__setattr__(self, "covariance", covariance)

    @property
    def dim(self) -> int:
        return self.mean.size

    def is_valid(self, tolerance: float = 1e-10) -> bool:
        """Check symmetry and positive semi-definiteness within tolerance."""
        cov = self.covariance
        scale = max(float(np.abs(cov).max(initial=0.0)), 1.0)
        if not np.allclose(cov, cov.T, rtol=tolerance, atol=tolerance * scale):
            return False
        if self.dim == 0:
            return True
        eigenvalues = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        return bool(eigenvalues.min() >= -tolerance * max(np.trace(cov), 1.0))


@dataclass(frozen=True, eq=False)
class EvolutionSchedule:
    """Evolution covariances used between consecutive times.

    Entry ``t`` holds the covariance added when moving from ``t - 1`` to ``t``;
    entry 0 is unused and zero.

    Args:
        shared: Shared-block evolution covariances, shape ``(T + 1, p, p)``
        levels: Subject-level evolution variances, shape ``(T + 1, N)``
    """

    shared: np.ndarray
    levels: np.ndarray

    @property
    def n_times(self) -> int:
        return self.shared.shape[0]

    def take(
        self, indices: Iterable[int], shared_scale: float = 1.0
    ) -> EvolutionSchedule:
        """Re-index the subject levels and rescale the shared block."""
        indices = np.asarray(list(indices), dtype=int)
        return EvolutionSchedule(self.shared * shared_scale, self.levels[:, indices])


@dataclass(frozen=True, eq=False)
class FilterTrace:
    """Forward-pass output of :func:`kalman_filter`.

    ``residuals[t]`` has one row per observation used at ``t`` holding the
    subject index, one-step forecast error and forecast variance.
    """

    spec: ModelSpec
    predicted_means: np.ndarray
    predicted_covariances: np.ndarray
    filtered_means: np.ndarray
    filtered_covariances: np.ndarray
    residuals: tuple[np.ndarray, ...]
    n_observations: np.ndarray
    schedule: EvolutionSchedule

    @property
    def n_times(self) -> int:
        return self.filtered_means.shape[0]

    def predictive(self, t: int) -> GaussianBelief:
        return GaussianBelief(
            self.predicted_means[t], self.predicted_covariances[t], t
        )

    def filtered(self, t: int) -> GaussianBelief:
        return GaussianBelief(self.filtered_means[t], self.filtered_covariances[t], t)


@dataclass(frozen=True, eq=False)
class SharedPaths:
    """Per-time beliefs over the shared block, with named path extraction."""

    layout: StateLayout
    tag: str
    means: np.ndarray
    covariances: np.ndarray | None = None

    @property
    def n_times(self) -> int:
        return self.means.shape[0]

    def path(self, name: str) -> np.ndarray:
        return self.means[:, self.layout.index(name)]

    def variance_path(self, name: str) -> np.ndarray:
        if self.covariances is None:
            error_msg = "Shared paths were built without covariances"
            raise ConfigurationError(error_msg)
        index = self.layout.index(name)
        return self.covariances[:, index, index]

    def belief(self, t: int) -> GaussianBelief:
        if self.covariances is None:
            error_msg = "Shared paths were built without covariances"
            raise ConfigurationError(error_msg)
        return GaussianBelief(self.means[t], self.covariances[t], t)


@dataclass(frozen=True, eq=False)
class SmoothedFit:
    """Fixed-interval smoothed fit of one model."""

    spec: ModelSpec
    shared: SharedPaths
    level_means: np.ndarray
    level_variances: np.ndarray
    schedule: EvolutionSchedule

    @property
    def tag(self) -> str:
        return self.spec.tag

    @property
    def paths(self) -> dict[str, np.ndarray]:
        return {name: self.shared.path(name) for name in self.spec.layout.shared_names}

    def subject_belief(self, subject: int, t: int) -> GaussianBelief:
        return GaussianBelief(
            self.level_means[t, subject : subject + 1],
            self.level_variances[t, subject].reshape(1, 1),
            t,
        )

    def describe(self) -> dict[str, object]:
        """Configuration summary recorded alongside the fit."""
        return self.spec.describe()


@dataclass(frozen=True, eq=False)
class PathBasis:
    """Coordinates of the stacked shared-state path ``z``.

    Static shared states (discount 1) appear once; dynamic ones appear once per
    time. Static coordinates come first, followed by the dynamic block of each
    time in order.

    Args:
        n_times: Number of time points ``T + 1``
        shared_dim: Number of shared states per time
        static: Indices of the static shared states
    """

    n_times: int
    shared_dim: int
    static: tuple[int, ...]
    _coordinates: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        static = list(self.static)
        dynamic = [j for j in range(self.shared_dim) if j not in set(static)]
        coordinates = np.empty((self.n_times, self.shared_dim), dtype=int)
        for t in range(self.n_times):
            coordinates[t, static] = np.arange(len(static))
            start = len(static) + t * len(dynamic)
            coordinates[t, dynamic] = start + np.arange(len(dynamic))
        object.__setattr__(self, "_coordinates", coordinates)

    @classmethod
    def from_spec(cls, spec: ModelSpec) -> PathBasis:
        layout = spec.layout
        static = tuple(
            sorted(
                index
                for group, indices in layout.groups
                if spec.discounts.for_group(group) == 1.0
                for index in indices
            )
        )
        return cls(spec.rows.shape[1], layout.shared_dim, static)

    @property
    def dynamic(self) -> tuple[int, ...]:
        static = set(self.static)
        return tuple(j for j in range(self.shared_dim) if j not in static)

    @property
    def dim(self) -> int:
        return len(self.static) + self.n_times * len(self.dynamic)

    def coordinates(self, t: int) -> np.ndarray:
        """Path coordinates holding the shared states at time ``t``."""
        return self._coordinates[t]

    def marginals(
        self, mean: np.ndarray, covariance: np.ndarray | None = None
    ) -> tuple[np.ndarray, np.ndarray | None]:
        """Per-time means (and covariances) of a belief over the path."""
        means = mean[self._coordinates]
        if covariance is None:
            return means, None
        covariances = np.stack(
            [covariance[np.ix_(c, c)] for c in self._coordinates], axis=0
        )
        return means, covariances


@dataclass(frozen=True, eq=False)
class PathInformation:
    """Information-form contribution over the stacked shared-state path."""

    precision: np.ndarray
    shift: np.ndarray

    def __add__(self, other: PathInformation) -> PathInformation:
        return PathInformation(
            self.precision + other.precision, self.shift + other.shift
        )

    def scaled(self, factor: float) -> PathInformation:
        return PathInformation(factor * self.precision, factor * self.shift)


@dataclass(frozen=True, eq=False)
class SubjectPosterior:
    """Posterior of one subject's data under the shared prior raised to 1/N.

    Args:
        subject_id: Subject identifier
        index: Position of the subject in the panel
        arm: Treatment arm of the subject
        prior_share: Power applied to the shared-block prior
        shared: Smoothed per-time shared-block beliefs
        level_means: Smoothed means of the subject's own level
        level_variances: Smoothed variances of the subject's own level
        trace: The subject-level filter trace
        basis: Coordinates of the shared path
        prior: Shared path prior already raised to ``prior_share``
        likelihood: Information contributed over the whole shared path
    """

    subject_id: str
    index: int
    arm: int
    prior_share: float
    shared: SharedPaths
    level_means: np.ndarray
    level_variances: np.ndarray
    trace: FilterTrace
    basis: PathBasis | None = None
    prior: PathInformation | None = None
    likelihood: PathInformation | None = None

    @property
    def has_path_information(self) -> bool:
        return self.prior is not None and self.likelihood is not None

    def path_information(self) -> PathInformation:
        if not self.has_path_information:
            error_msg = f"Subject {self.subject_id} was decomposed without paths"
            raise ConfigurationError(error_msg)
        return self.prior + self.likelihood
