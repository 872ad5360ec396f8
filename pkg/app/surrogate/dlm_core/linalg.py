"""Dense linear-algebra helpers for the filter, smoother and decomposition."""

from logging import getLogger

import numpy as np
from scipy import linalg

from app.common.errors import NumericalError

logger = getLogger(__name__)

JITTER_FACTOR = 1e-10


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    """Return ``(A + A^T) / 2``."""
    return 0.5 * (matrix + matrix.T)


def jitter(matrix: np.ndarray) -> float:
    """Diagonal loading proportional to the mean diagonal entry."""
    dim = matrix.shape[0]
    if dim == 0:
        return 0.0
    scale = float(np.trace(matrix)) / dim
    return JITTER_FACTOR * scale if scale > 0 else 0.0


def cholesky(matrix: np.ndarray, context: str) -> tuple[np.ndarray, bool]:
    """Cholesky-factor a symmetric positive-definite matrix.

    The plain factorization is tried first; on failure the matrix is loaded with
    jitter and factorized again.

    Args:
        matrix: Symmetric matrix to factorize
        context: Description used in log and error messages

    Returns:
        The ``cho_factor`` tuple accepted by ``scipy.linalg.cho_solve``

    Raises:
        NumericalError: If the jittered matrix is still not positive definite
    """
    try:
        return linalg.cho_factor(matrix, lower=True, check_finite=False)
    except linalg.LinAlgError:
        pass

    loading = jitter(matrix)
    if loading == 0.0:
        error_msg = f"Cannot regularize a matrix with non-positive trace: {context}"
        raise NumericalError(error_msg)
    logger.warning("Applying jitter %.3g before inverting %s", loading, context)
    try:
        return linalg.cho_factor(
            matrix + loading * np.eye(matrix.shape[0]), lower=True, check_finite=False
        )
    except linalg.LinAlgError as e:
        error_msg = f"Matrix is not positive definite after jitter: {context}"
        raise NumericalError(error_msg) from e


def solve_spd(matrix: np.ndarray, rhs: np.ndarray, context: str) -> np.ndarray:
    """Solve ``matrix @ x = rhs`` for a symmetric positive-definite ``matrix``."""
    factor = cholesky(matrix, context)
    return linalg.cho_solve(factor, rhs, check_finite=False)


def inverse_spd(matrix: np.ndarray, context: str) -> np.ndarray:
    """Inverse of a symmetric positive-definite matrix, symmetrized."""
    return symmetrize(solve_spd(matrix, np.eye(matrix.shape[0]), context))
