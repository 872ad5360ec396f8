from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.common.errors import ConfigurationError, DataError


@dataclass(frozen=True)
class SurrogateBasis:
    """Basis for the surrogate effect functions.

    Args:
        kind: ``linear`` (one column) or ``bins`` (piecewise-constant indicators)
        edges: Left-closed bin edges, strictly increasing; one bin per edge
        per_arm: Whether treated subjects get their own coefficients
    """

    kind: Literal["linear", "bins"] = "linear"
    edges: tuple[float, ...] = ()
    per_arm: bool = False

    def __post_init__(self):
        if self.kind not in ("linear", "bins"):
            error_msg = f"Unknown basis kind '{self.kind}'"
            raise ConfigurationError(error_msg)
        edges = tuple(float(e) for e in self.edges)
        if self.kind == "linear" and edges:
            error_msg = "A linear basis takes no bin edges"
            raise ConfigurationError(error_msg)
        if self.kind == "bins":
            if len(edges) < 2:
                error_msg = "A bins basis needs at least two edges"
                raise ConfigurationError(error_msg)
            if not np.isfinite(edges).all() or np.any(np.diff(edges) <= 0):
                error_msg = f"Bin edges must be finite and strictly increasing: {edges}"
                raise ConfigurationError(error_msg)
        object.__setattr__(self, "edges", edges)

    @property
    def dim(self) -> int:
        """Length of :func:`basis_expand` output."""
        return 1 if self.kind == "linear" else len(self.edges)

    @property
    def design_dim(self) -> int:
        """Columns per lag; the first bin is the reference level."""
        return 1 if self.kind == "linear" else len(self.edges) - 1

    def column_labels(self) -> list[str]:
        if self.kind == "linear":
            return ["linear"]
        return [f"bin{k}" for k in range(1, len(self.edges))]


def basis_expand(basis: SurrogateBasis, value: float) -> np.ndarray:
    """Expand one surrogate value.

    Linear gives ``[value]``; bins give a one-hot vector over the left-closed
    intervals, with values outside the edges clamped to the end bins.

    Raises:
        DataError: If ``value`` is not finite
    """
    if not np.isfinite(value):
        error_msg = f"Cannot expand non-finite surrogate value {value}"
        raise DataError(error_msg)
    if basis.kind == "linear":
        return np.array([float(value)])
    expanded = np.zeros(basis.dim)
    expanded[bin_index(basis, value)] = 1.0
    return expanded


def bin_index(basis: SurrogateBasis, value: float | np.ndarray) -> np.ndarray | int:
    edges = np.asarray(basis.edges)
    index = np.clip(np.searchsorted(edges, value, side="right") - 1, 0, edges.size - 1)
    return int(index) if np.ndim(index) == 0 else index


def design_columns(basis: SurrogateBasis, values: np.ndarray) -> np.ndarray:
    """Design columns for an array of values, shape ``values.shape + (design_dim,)``.

    NaN inputs produce zero columns.
    """
    values = np.asarray(values, dtype=float)
    observed = ~np.isnan(values)
    if basis.kind == "linear":
        return np.where(observed, values, 0.0)[..., np.newaxis]
    index = bin_index(basis, np.where(observed, values, basis.edges[0]))
    one_hot = np.arange(basis.dim) == np.asarray(index)[..., np.newaxis]
    one_hot &= observed[..., np.newaxis]
    return one_hot[..., 1:].astype(float)
