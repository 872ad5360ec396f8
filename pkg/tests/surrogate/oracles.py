"""
Brute-force references for the filter, smoother and recombination bootstrap.
"""

import numpy as np

from app.surrogate.design import ModelSpec, Panel
from app.surrogate.dlm_core import (
    EvolutionSchedule,
    kalman_filter,
    kalman_smoother,
)


def dense_posterior(
    spec: ModelSpec, panel: Panel, schedule: EvolutionSchedule
) -> tuple[np.ndarray, np.ndarray]:
    """Posterior means of every state at every time from one dense solve.

    The stacked state ``(theta_0, ..., theta_T)`` has a random-walk prior whose
    covariance between times ``s`` and ``t`` is the initial covariance plus the
    evolution covariances accumulated up to ``min(s, t)``.

    Returns:
        Shared means ``(T + 1, p)`` and level means ``(T + 1, N)``
    """
    n_subjects, n_times, p = spec.rows.shape
    dim = p + n_subjects
    increments = np.zeros((n_times, dim, dim))
    increments[0, :p, :p] = np.diag(spec.prior.shared_variance)
    increments[0, p:, p:] = spec.prior.level_variance * np.eye(n_subjects)
    for t in range(1, n_times):
        increments[t, :p, :p] = schedule.shared[t]
        increments[t, p:, p:] = np.diag(schedule.levels[t])
    accumulated = np.cumsum(increments, axis=0)

    covariance = np.zeros((n_times * dim, n_times * dim))
    for s in range(n_times):
        for t in range(n_times):
            block = accumulated[min(s, t)]
            covariance[s * dim : (s + 1) * dim, t * dim : (t + 1) * dim] = block
    initial = np.concatenate([spec.prior.mean, np.zeros(n_subjects)])
    prior_mean = np.tile(initial, n_times)

    rows, observations, variances = [], [], []
    for t in range(n_times):
        for i in np.flatnonzero(spec.usable[:, t]):
            row = np.zeros(n_times * dim)
            row[t * dim : t * dim + p] = spec.rows[i, t]
            row[t * dim + p + i] = 1.0
            rows.append(row)
            observations.append(panel.outcome[i, t])
            variances.append(spec.observation_variance(i))
    design = np.array(rows)
    forecast = design @ covariance @ design.T + np.diag(variances)
    gain = np.linalg.solve(forecast, design @ covariance).T
    posterior = prior_mean + gain @ (np.array(observations) - design @ prior_mean)
    posterior = posterior.reshape(n_times, dim)
    return posterior[:, :p], posterior[:, p:]


def naive_refit(
    spec: ModelSpec,
    panel: Panel,
    schedule: EvolutionSchedule,
    indices: np.ndarray,
) -> np.ndarray:
    """Shared smoothed means of a resampled panel refitted from scratch.

    The refit keeps the full-panel prior and evolution schedule, which is what
    recombination reproduces.
    """
    trace = kalman_filter(
        spec.subset(indices, rename=True),
        panel.take(indices),
        schedule=schedule.take(indices),
    )
    return kalman_smoother(trace).shared.means
