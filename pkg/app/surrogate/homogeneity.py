"""
Tests of temporal homogeneity of the proportion of treatment effect explained.

Under homogeneity ``delta_R(t) = (1 - tau) * delta(t)`` at every time, where
``tau`` is the global PTE. The maximum standardized deviation (MSD) test compares
``max_t |delta_diff(t) / sigma(t)|`` with draws from its simulated null
distribution; the Wald test is the chi-squared comparator.
"""

import math
from dataclasses import dataclass
from logging import getLogger

import numpy as np
from scipy import stats

from app.common.errors import DegenerateVarianceError, NumericalError
from app.surrogate.bootstrap import BootstrapDraws
from app.surrogate.dlm_core.linalg import cholesky, symmetrize
from app.surrogate.estimators import DEFAULT_DENOMINATOR_EPS, EffectPath
from app.surrogate.models import TestResult

logger = getLogger(__name__)

DEFAULT_NULL_DRAWS = 10_000
RANK_TOLERANCE = 1e-10


@dataclass(frozen=True, eq=False)
class DiffPath:
    """``delta_diff(t) = delta_R(t) - (1 - tau_hat) * delta(t)`` and its spread.

    Args:
        values: Deviation from homogeneity per time; sums to zero
        tau_hat: Plug-in global PTE
        sigma: Bootstrap standard deviation per time with ``tau_hat`` held fixed
        delta: Point estimate of the treatment effect path
        delta_R: Point estimate of the residual effect path
        eps: Guard below which a total effect leaves ``tau`` undefined
    """

    values: np.ndarray
    tau_hat: float
    sigma: np.ndarray
    delta: np.ndarray
    delta_R: np.ndarray
    eps: float = DEFAULT_DENOMINATOR_EPS

    @property
    def n_times(self) -> int:
        return self.values.size

    @property
    def standardized(self) -> np.ndarray:
        return self.values / self.sigma


def _defined_rows(draws: BootstrapDraws) -> tuple[np.ndarray, np.ndarray]:
    defined = np.isfinite(draws.delta).all(axis=1) & np.isfinite(draws.delta_R).all(
        axis=1
    )
    return draws.delta_R[defined], draws.delta[defined]


def _tau(delta_R: np.ndarray, delta: np.ndarray, eps: float) -> np.ndarray:
    """Global PTE along the last axis; NaN where the total effect vanishes."""
    total = delta.sum(axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = 1.0 - delta_R.sum(axis=-1) / total
    return np.where(np.abs(total) < eps, np.nan, tau)


def delta_diff(
    delta_R: EffectPath,
    delta: EffectPath,
    draws: BootstrapDraws,
    tau_hat: float | None = None,
    eps_denom: float = DEFAULT_DENOMINATOR_EPS,
) -> DiffPath:
    """Deviation path from temporal homogeneity with per-time bootstrap SDs.

    Args:
        delta_R: Residual effect path
        delta: Treatment effect path
        draws: Paired bootstrap draws of both paths
        tau_hat: Global PTE; the plug-in value from the two paths by default
        eps_denom: Total effects smaller than this leave the global PTE undefined

    Returns:
        The deviation path

    Raises:
        NumericalError: If the global PTE is undefined
        DegenerateVarianceError: If a bootstrap SD is zero
    """
    if tau_hat is None:
        tau_hat = float(_tau(delta_R.values, delta.values, eps_denom))
    if not np.isfinite(tau_hat):
        error_msg = "Global PTE is undefined: the total treatment effect vanishes"
        raise NumericalError(error_msg)
    values = delta_R.values - (1.0 - tau_hat) * delta.values

    replicate_R, replicate_delta = _defined_rows(draws)
    if replicate_R.shape[0] < 2:
        error_msg = "Need at least two defined bootstrap replicates for the spread"
        raise DegenerateVarianceError(error_msg)
    spread = replicate_R - (1.0 - tau_hat) * replicate_delta
    sigma = np.std(spread, axis=0, ddof=1)
    if np.any(sigma <= 0.0):
        error_msg = (
            f"Bootstrap SD of delta_diff is zero at t={np.flatnonzero(sigma <= 0.0)}"
        )
        raise DegenerateVarianceError(error_msg)
    return DiffPath(
        values=values,
        tau_hat=tau_hat,
        sigma=sigma,
        delta=delta.values.copy(),
        delta_R=delta_R.values.copy(),
        eps=eps_denom,
    )


def _critical_value(null: np.ndarray, alpha: float) -> float:
    """The ``ceil(alpha * M)``-th largest null draw."""
    ordered = np.sort(null)
    rank = max(math.ceil(alpha * ordered.size), 1)
    return float(ordered[ordered.size - rank])


def msd_test(
    diff: DiffPath,
    draws: BootstrapDraws,
    alpha: float = 0.05,
    n_null_draws: int = DEFAULT_NULL_DRAWS,
    seed: int = 0,
    *,
    fixed_tau: bool = False,
) -> TestResult:
    """Maximum standardized deviation test with a simulated null.

    Null draws of the stacked ``(delta_R, delta)`` are Gaussian with the bootstrap
    covariance, centred at ``((1 - tau_hat) * delta_hat, delta_hat)``. Each draw
    goes through the same standardization as the data, with ``tau`` re-estimated
    per draw unless ``fixed_tau`` is set.

    Args:
        diff: Deviation path
        draws: Paired bootstrap draws
        alpha: Test level
        n_null_draws: Number of null draws ``M``
        seed: Seed of the null draws
        fixed_tau: Keep ``tau_hat`` fixed inside the null draws

    Returns:
        The test result; ``p = #(null >= statistic) / M``
    """
    statistic = float(np.max(np.abs(diff.standardized)))
    n_times = diff.n_times
    if n_times == 1:
        logger.info("Single time point: homogeneity holds trivially")
        return TestResult(
            method="msd",
            statistic=0.0,
            critical_value=0.0,
            p_value=1.0,
            alpha=alpha,
            draws=0,
            fixed_tau=fixed_tau,
        )

    replicate_R, replicate_delta = _defined_rows(draws)
    if replicate_R.shape[0] < 10 * n_times:
        logger.warning(
            "%d bootstrap replicates for %d time points; at least %d are recommended",
            replicate_R.shape[0],
            n_times,
            10 * n_times,
        )
    stacked = np.hstack([replicate_R, replicate_delta])
    covariance = symmetrize(np.atleast_2d(np.cov(stacked, rowvar=False)))
    factor, _ = cholesky(covariance, "bootstrap covariance of (delta_R, delta)")
    lower = np.tril(factor)

    center = np.concatenate([(1.0 - diff.tau_hat) * diff.delta, diff.delta])
    rng = np.random.default_rng(seed)
    samples = center + rng.standard_normal((n_null_draws, center.size)) @ lower.T
    null_R, null_delta = samples[:, :n_times], samples[:, n_times:]
    tau = (
        np.full(n_null_draws, diff.tau_hat)
        if fixed_tau
        else _tau(null_R, null_delta, diff.eps)
    )
    deviations = null_R - (1.0 - tau[:, np.newaxis]) * null_delta
    null = np.max(np.abs(deviations / diff.sigma), axis=1)
    null = np.where(np.isnan(null), np.inf, null)

    p_value = float(np.count_nonzero(null >= statistic) / n_null_draws)
    result = TestResult(
        method="msd",
        statistic=statistic,
        critical_value=_critical_value(null, alpha),
        p_value=p_value,
        alpha=alpha,
        draws=n_null_draws,
        fixed_tau=fixed_tau,
    )
    logger.info(
        "MSD statistic %.4f, critical value %.4f, p=%.4f",
        result.statistic,
        result.critical_value,
        result.p_value,
    )
    return result


def wald_statistic(values: np.ndarray, covariance: np.ndarray) -> tuple[float, int]:
    """Quadratic form on the sum-to-zero subspace.

    The covariance is projected with ``I - 11'/n`` and pseudo-inverted.

    Returns:
        The statistic and the rank of the projected covariance
    """
    n = values.size
    projection = np.eye(n) - np.full((n, n), 1.0 / n)
    projected = symmetrize(projection @ covariance @ projection)
    eigenvalues = np.linalg.eigvalsh(projected)
    rank = int(np.sum(eigenvalues > RANK_TOLERANCE * max(eigenvalues.max(), 0.0)))
    if eigenvalues.max() <= 0.0:
        rank = 0
    pseudo_inverse = np.linalg.pinv(projected, hermitian=True)
    centered = projection @ values
    return float(centered @ pseudo_inverse @ centered), rank


def wald_test(diff: DiffPath, draws: BootstrapDraws, alpha: float = 0.05) -> TestResult:
    """Wald comparator with ``T`` degrees of freedom.

    The covariance is that of the per-replicate deviation paths, each with its own
    re-estimated ``tau``. The test is known to over-reject as the number of
    time points grows.

    Raises:
        NumericalError: If the projected covariance is singular
    """
    df = diff.n_times - 1
    if df == 0:
        return TestResult(
            method="wald",
            statistic=0.0,
            critical_value=0.0,
            p_value=1.0,
            alpha=alpha,
            draws=draws.replicates,
            df=0,
        )
    replicate_R, replicate_delta = _defined_rows(draws)
    tau = _tau(replicate_R, replicate_delta, diff.eps)
    deviations = replicate_R - (1.0 - tau[:, np.newaxis]) * replicate_delta
    deviations = deviations[np.isfinite(deviations).all(axis=1)]
    if deviations.shape[0] < 2:
        error_msg = "Too few defined replicates for the Wald covariance; use MSD"
        raise NumericalError(error_msg)
    covariance = np.atleast_2d(np.cov(deviations, rowvar=False))
    statistic, rank = wald_statistic(diff.values, covariance)
    if rank < df:
        error_msg = (
            f"Wald covariance is singular (rank {rank} < {df}); use the MSD test"
        )
        raise NumericalError(error_msg)
    result = TestResult(
        method="wald",
        statistic=statistic,
        critical_value=float(stats.chi2.ppf(1.0 - alpha, df)),
        p_value=float(stats.chi2.sf(statistic, df)),
        alpha=alpha,
        draws=deviations.shape[0],
        df=df,
    )
    logger.info("Wald statistic %.4f on %d df, p=%.4f", statistic, df, result.p_value)
    return result
