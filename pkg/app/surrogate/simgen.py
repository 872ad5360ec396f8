"""
Synthetic randomized trials with a known proportion of treatment effect explained.

Each subject follows

    Y_t = mu_t + beta * S_t + beta_lag * S_{t-1} + gamma1 * H1(t) * G
    mu_t = phi1 * mu_{t-1} + sign * V_t * omega_t
    S_t = nu_t + gamma2 * H2(t) * G
    nu_t = phi2 * nu_{t-1} + N(0, W)

with ``omega`` a mean-zero log-gamma innovation and ``V_t`` a gamma mixing scale
with mean ``V``. Time is counted in quarters, so a study of ``years`` has
``4 * years + 1`` measurements.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from logging import getLogger
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy import special

from app.common.errors import ConfigurationError, NumericalError
from app.surrogate.design import Panel
from app.surrogate.models import TruthRecord

logger = getLogger(__name__)

TrajectoryKind = Literal["monotone", "parabola", "random_walk", "custom"]

RANDOM_WALK_SEED = 20_240_917
MEASUREMENTS_PER_YEAR = 4
CALIBRATION_TARGETS = (0.25, 0.5, 0.75, 0.9, 1.0)
MC_MAX_HORIZON = 3
MC_CELL_SIZE = 50

# Frozen scenario constants: direct-to-surrogate effect ratios and baselines.
SEASONAL_BASELINE = 0.1
SCENARIO_DIRECT_RATIO = {1: 1.0, 4: 1.0, 5: 0.2}


def seasonal(n_times: int) -> np.ndarray:
    """Yearly seasonal profile in ``[0, 1]``, zero at the start of every year."""
    t = np.arange(n_times)
    return (1.0 - np.cos(2.0 * np.pi * t / MEASUREMENTS_PER_YEAR)) / 2.0


def trajectory(kind: TrajectoryKind, horizon: int) -> np.ndarray:
    """Treatment effect profile ``H(t)`` over ``t = 0..horizon``.

    Args:
        kind: ``monotone`` is ``t / T``; ``parabola`` is ``4u(1 - u)`` with
            ``u = t / T``; ``random_walk`` is a fixed seeded Gaussian walk
            rescaled to ``[0, 1]``
        horizon: Last time index ``T``

    Raises:
        ConfigurationError: For ``custom`` or unknown kinds
    """
    if horizon < 0:
        error_msg = f"Horizon must be non-negative, got {horizon}"
        raise ConfigurationError(error_msg)
    if horizon == 0:
        return np.zeros(1)
    u = np.arange(horizon + 1) / horizon
    if kind == "monotone":
        return u
    if kind == "parabola":
        return 4.0 * u * (1.0 - u)
    if kind == "random_walk":
        steps = np.random.default_rng([RANDOM_WALK_SEED, horizon]).standard_normal(
            horizon + 1
        )
        walk = np.cumsum(steps)
        spread = walk.max() - walk.min()
        return (walk - walk.min()) / spread if spread > 0 else np.zeros(horizon + 1)
    error_msg = f"Trajectory kind '{kind}' has no built-in profile"
    raise ConfigurationError(error_msg)


class GenConfig(BaseModel):
    """Generator settings.

    ``df_tau`` is the degrees of freedom of the gamma mixing scale; it has no
    relation to the global PTE.
    """

    n_per_arm: int = Field(100, ge=1, description="Subjects per arm")
    horizon: int = Field(4, ge=0, description="Last time index T")
    alpha_shape: float = Field(1.0, description="Log-gamma shape of the innovations")
    df_tau: float = Field(10.0, description="Degrees of freedom of the mixing scale")
    V: float = Field(0.0025, description="Mean observation scale")
    W: float | None = Field(None, description="Surrogate innovation variance")
    phi1: float = 0.9
    phi2: float = 0.5
    beta: float = 1.0
    beta_lag: float = Field(0.0, description="Outcome slope on the lagged surrogate")
    gamma1: float = 0.2
    gamma2: float = 0.2
    sign: Literal[-1, 1] = 1
    h1_kind: TrajectoryKind = "monotone"
    h2_kind: TrajectoryKind = "monotone"
    h1: list[float] | None = None
    h2: list[float] | None = None
    gamma_parameterization: Literal["rate", "product"] = Field(
        "rate",
        description=(
            "'rate': shape df/2 and rate df/(2V); 'product': shape df/2 and "
            "rate df*V/2"
        ),
    )
    seed: int = 0

    @field_validator("alpha_shape", "df_tau", "V")
    @classmethod
    def _positive(cls, value: float) -> float:
        if value <= 0:
            error_msg = f"must be positive, got {value}"
            raise ValueError(error_msg)
        return value

    @field_validator("phi1")
    @classmethod
    def _phi1(cls, value: float) -> float:
        if abs(value) > 1:
            error_msg = f"|phi1| must be at most 1, got {value}"
            raise ValueError(error_msg)
        return value

    @field_validator("phi2")
    @classmethod
    def _phi2(cls, value: float) -> float:
        if abs(value) >= 1:
            error_msg = f"|phi2| must be below 1, got {value}"
            raise ValueError(error_msg)
        return value

    @model_validator(mode="after")
    def _profiles(self) -> "GenConfig":
        if self.W is None:
            self.W = 0.2 * self.V
        if self.W <= 0:
            error_msg = f"W must be positive, got {self.W}"
            raise ValueError(error_msg)
        for name, kind, values in (
            ("h1", self.h1_kind, self.h1),
            ("h2", self.h2_kind, self.h2),
        ):
            if kind == "custom" and values is None:
                error_msg = f"{name}_kind 'custom' needs explicit {name} values"
                raise ValueError(error_msg)
            if values is not None and len(values) != self.horizon + 1:
                expected = self.horizon + 1
                error_msg = f"{name} has {len(values)} values, expected {expected}"
                raise ValueError(error_msg)
        return self

    @property
    def n_times(self) -> int:
        return self.horizon + 1

    @property
    def innovation_variance(self) -> float:
        return float(self.W)

    def profiles(self) -> tuple[np.ndarray, np.ndarray]:
        """``H1`` and ``H2`` over ``t = 0..T``."""
        h1 = (
            np.asarray(self.h1, dtype=float)
            if self.h1 is not None
            else trajectory(self.h1_kind, self.horizon)
        )
        h2 = (
            np.asarray(self.h2, dtype=float)
            if self.h2 is not None
            else trajectory(self.h2_kind, self.horizon)
        )
        return h1, h2


def make_config(**values) -> GenConfig:
    """Validate generator settings, mapping validation failures to configuration
    errors."""
    try:
        return GenConfig(**values)
    except ValidationError as e:
        error_msg = f"Invalid generator configuration: {e}"
        raise ConfigurationError(error_msg) from e


def _updated(base: GenConfig, **changes) -> GenConfig:
    return make_config(**(base.model_dump() | changes))


def log_gamma_sample(
    alpha: float, rng: np.random.Generator, size: int | tuple[int, ...] | None = None
) -> float | np.ndarray:
    """Mean-zero log-gamma draws.

    Each draw is ``log X`` with ``X ~ Gamma(alpha, rate=exp(psi(alpha)))``.

    The distribution is left skewed, approaching a Gaussian as ``alpha`` grows.

    Raises:
        ConfigurationError: If ``alpha`` is not positive
    """
    if not alpha > 0:
        error_msg = f"Log-gamma shape must be positive, got {alpha}"
        raise ConfigurationError(error_msg)
    rate = math.exp(special.digamma(alpha))
    return np.log(rng.gamma(alpha, 1.0 / rate, size=size))


def mixing_scale(
    config: GenConfig, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Gamma mixing scales ``V_t``; mean ``V`` under the rate reading."""
    shape = config.df_tau / 2.0
    if config.gamma_parameterization == "rate":
        scale = 2.0 * config.V / config.df_tau
    else:
        scale = 2.0 / (config.df_tau * config.V)
    return rng.gamma(shape, scale, size=size)


def _simulate_subject(
    config: GenConfig,
    arm: int,
    rng: np.random.Generator,
    h1: np.ndarray,
    h2: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    n_times = config.n_times
    scales = mixing_scale(config, rng, n_times)
    omega = log_gamma_sample(config.alpha_shape, rng, n_times)
    noise = rng.standard_normal(n_times) * math.sqrt(config.innovation_variance)

    mu = np.empty(n_times)
    nu = np.empty(n_times)
    mu[0] = omega[0] * math.sqrt(scales[0] / (1.0 - config.phi2))
    nu[0] = rng.standard_normal() * math.sqrt(
        config.innovation_variance / (1.0 - config.phi2)
    )
    for t in range(1, n_times):
        mu[t] = config.phi1 * mu[t - 1] + config.sign * scales[t] * omega[t]
        nu[t] = config.phi2 * nu[t - 1] + noise[t]

    surrogate = nu + config.gamma2 * h2 * arm
    lagged = np.concatenate([[0.0], surrogate[:-1]])
    outcome = mu + config.beta * surrogate + config.beta_lag * lagged
    outcome = outcome + config.gamma1 * h1 * arm
    return outcome, surrogate


def _truth(
    delta: np.ndarray, delta_R: np.ndarray, method: Literal["analytic", "monte-carlo"]
) -> TruthRecord:
    eps = 1e-12
    lpte = [
        None if abs(d) < eps else float(1.0 - r / d) for d, r in zip(delta, delta_R)
    ]
    cumulative, cumulative_R = np.cumsum(delta), np.cumsum(delta_R)
    cpte = [
        None if abs(d) < eps else float(1.0 - r / d)
        for d, r in zip(cumulative, cumulative_R)
    ]
    return TruthRecord(
        method=method,
        delta=delta.tolist(),
        delta_r=delta_R.tolist(),
        lpte=lpte,
        cpte=cpte,
        pte=cpte[-1],
    )


def analytic_truth(config: GenConfig) -> TruthRecord:
    """True effect paths of the linear generator.

    Conditioning on the surrogate history removes every pathway through ``S``,
    so ``delta_R(t) = gamma1 * H1(t)`` while ``delta(t)`` adds
    ``gamma2 * (beta * H2(t) + beta_lag * H2(t - 1))``.
    """
    h1, h2 = config.profiles()
    lagged_h2 = np.concatenate([[0.0], h2[:-1]])
    direct = config.gamma1 * h1
    delta = direct + config.gamma2 * (config.beta * h2 + config.beta_lag * lagged_h2)
    return _truth(delta, direct, "analytic")


def generate_panel(config: GenConfig, threads: int = 1) -> tuple[Panel, TruthRecord]:
    """Simulate one trial.

    Subject ``i`` draws from its own stream ``default_rng([seed, i])``; controls
    take the first ``n_per_arm`` ids.

    Returns:
        The panel and the analytic truth
    """
    h1, h2 = config.profiles()
    n_subjects = 2 * config.n_per_arm
    arms = np.repeat([0, 1], config.n_per_arm)
    width = max(4, len(str(n_subjects)))
    subject_ids = [f"s{i + 1:0{width}d}" for i in range(n_subjects)]

    def simulate(i: int) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng([config.seed, i])
        return _simulate_subject(config, int(arms[i]), rng, h1, h2)

    logger.info(
        "Simulating %d subjects over %d times (seed=%d)",
        n_subjects,
        config.n_times,
        config.seed,
    )
    if threads > 1:
        with ThreadPoolExecutor(
            max_workers=threads, thread_name_prefix="simgen_"
        ) as pool:
            simulated = list(pool.map(simulate, range(n_subjects)))
    else:
        simulated = [simulate(i) for i in range(n_subjects)]

    panel = Panel.from_arrays(
        subject_ids,
        arms,
        np.stack([outcome for outcome, _ in simulated]),
        np.stack([surrogate for _, surrogate in simulated]),
    )
    return panel, analytic_truth(config)


def _history_cells(history: np.ndarray, bins: int) -> np.ndarray:
    """Cell code of every row on a grid of pooled quantile bins per column."""
    codes = np.zeros(history.shape[0], dtype=np.int64)
    cut_points = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    for column in history.T:
        edges = np.quantile(column, cut_points)
        codes = codes * bins + np.searchsorted(edges, column, side="right")
    return codes


def binned_residual_effect(
    history: np.ndarray, outcome: np.ndarray, arms: np.ndarray, bins: int
) -> tuple[float, float]:
    """Arm difference of the conditional mean outcome given a binned history.

    Cell means of each arm are differenced and averaged over the control arm's
    cell frequencies. Cells missing one arm are left out.

    Returns:
        The residual effect and the share of controls in the cells used
    """
    codes = _history_cells(history, bins)
    n_cells = bins ** history.shape[1]
    treated = arms == 1
    count0 = np.bincount(codes[~treated], minlength=n_cells)
    count1 = np.bincount(codes[treated], minlength=n_cells)
    sum0 = np.bincount(codes[~treated], weights=outcome[~treated], minlength=n_cells)
    sum1 = np.bincount(codes[treated], weights=outcome[treated], minlength=n_cells)
    shared = (count0 > 0) & (count1 > 0)
    if not shared.any():
        error_msg = "No surrogate-history cell holds subjects of both arms"
        raise NumericalError(error_msg)
    differences = sum1[shared] / count1[shared] - sum0[shared] / count0[shared]
    weights = count0[shared] / count0[shared].sum()
    return float(weights @ differences), float(count0[shared].sum() / count0.sum())


def monte_carlo_truth(
    config: GenConfig,
    n_per_arm: int = 100_000,
    seed: int = 0,
    threads: int = 1,
    cell_size: int = MC_CELL_SIZE,
) -> TruthRecord:
    """Brute-force truth from a large simulated trial.

    ``delta(t)`` is the difference of arm means. ``delta_R(t)`` compares the
    arms' empirical mean of ``Y_t`` within cells of the discretized surrogate
    history ``S_0..S_t``, weighted by the control distribution over the cells.
    Bins per history column are chosen so a cell holds about ``cell_size``
    controls. It needs surrogate distributions that overlap between arms.

    Raises:
        ConfigurationError: If the horizon exceeds ``MC_MAX_HORIZON``
        NumericalError: If the arms share no history cell
    """
    if config.horizon > MC_MAX_HORIZON:
        error_msg = (
            f"Monte Carlo truth supports horizons up to {MC_MAX_HORIZON}, "
            f"got {config.horizon}"
        )
        raise ConfigurationError(error_msg)
    large = _updated(config, n_per_arm=n_per_arm, seed=seed)
    panel, _ = generate_panel(large, threads)
    treated = panel.arms == 1
    delta = panel.outcome[treated].mean(axis=0) - panel.outcome[~treated].mean(axis=0)
    delta_R = np.empty(panel.n_times)
    for t in range(panel.n_times):
        width = t + 1
        bins = max(2, int((n_per_arm / cell_size) ** (1.0 / width)))
        delta_R[t], coverage = binned_residual_effect(
            panel.surrogate[:, :width], panel.outcome[:, t], panel.arms, bins
        )
        if coverage < 0.99:
            logger.warning(
                "Monte Carlo truth at t=%d uses %.1f%% of controls (%d bins)",
                t,
                100.0 * coverage,
                bins,
            )
    return _truth(delta, delta_R, "monte-carlo")


def calibrate(
    target_pte: float,
    h1_kind: TrajectoryKind = "monotone",
    h2_kind: TrajectoryKind = "monotone",
    base: GenConfig | None = None,
) -> GenConfig:
    """Set ``gamma1`` so the analytic PTE equals ``target_pte``.

    The identity solved is ``gamma1 * sum(H1) = (1 - target) / target * P`` where
    ``P = gamma2 * sum(beta * H2(t) + beta_lag * H2(t - 1))``.
    A target of 0 switches the surrogate pathway off with ``gamma2 = 0``.

    Raises:
        ConfigurationError: If the target lies outside ``[0, 1]`` or the direct
            profile sums to zero
    """
    if not 0.0 <= target_pte <= 1.0:
        error_msg = f"Target PTE must lie in [0, 1], got {target_pte}"
        raise ConfigurationError(error_msg)
    base = base or make_config()
    config = _updated(base, h1_kind=h1_kind, h2_kind=h2_kind, h1=None, h2=None)
    if target_pte == 0.0:
        return _updated(config, gamma2=0.0)

    h1, h2 = config.profiles()
    lagged_h2 = np.concatenate([[0.0], h2[:-1]])
    pathway = config.gamma2 * np.sum(config.beta * h2 + config.beta_lag * lagged_h2)
    if target_pte == 1.0:
        return _updated(config, gamma1=0.0)
    if h1.sum() == 0.0:
        error_msg = f"H1 profile '{h1_kind}' sums to zero; PTE cannot be calibrated"
        raise ConfigurationError(error_msg)
    gamma1 = (1.0 - target_pte) / target_pte * pathway / h1.sum()
    logger.debug("Calibrated gamma1=%.6g for target PTE %.3f", gamma1, target_pte)
    return _updated(config, gamma1=float(gamma1))


def scenario(scenario_id: int, duration_years: float = 1.0, **overrides) -> GenConfig:
    """Homogeneity scenarios over a study of ``duration_years``.

    1. Monotone effects with a constant local PTE.
    2. Seasonal direct effect over a small constant surrogate pathway: the local
       PTE is near 1 where the effect is small and near 0 where it is large.
    3. The inverse of 2.
    4. Direct effect fading while the surrogate pathway builds up: increasing
       local PTE with a cumulative PTE below 0.75.
    5. Surrogate pathway fading under a weak growing direct effect: decreasing
       local PTE with a cumulative PTE above 0.75.

    Raises:
        ConfigurationError: For an unknown id or a non-positive duration
    """
    if scenario_id not in (1, 2, 3, 4, 5):
        error_msg = f"Unknown scenario {scenario_id}; expected 1 to 5"
        raise ConfigurationError(error_msg)
    if duration_years <= 0:
        error_msg = f"Study duration must be positive, got {duration_years}"
        raise ConfigurationError(error_msg)
    horizon = round(MEASUREMENTS_PER_YEAR * duration_years)
    base = make_config(**({"horizon": horizon} | overrides))
    u = trajectory("monotone", base.horizon)
    season = seasonal(base.n_times)
    pathway_scale = base.beta * base.gamma2

    match scenario_id:
        case 1:
            h1, h2 = u, u
        case 2:
            h1, h2 = season, np.full(base.n_times, SEASONAL_BASELINE)
        case 3:
            h1, h2 = np.full(base.n_times, SEASONAL_BASELINE), season
        case 4:
            h1, h2 = 1.0 - u, u
        case 5:
            h1, h2 = u, 1.0 - u

    gamma1 = overrides.get(
        "gamma1", SCENARIO_DIRECT_RATIO.get(scenario_id, 1.0) * pathway_scale
    )
    return _updated(
        base,
        h1_kind="custom",
        h2_kind="custom",
        h1=h1.tolist(),
        h2=h2.tolist(),
        gamma1=gamma1,
    )
