"""
Command-line surface: argument parsing, configuration files and error mapping.

Every subcommand writes a JSON report, a plot-ready CSV table and a run manifest
into ``--out``, then prints one summary line on stdout. Failures print a single
``surrogate-error`` line on stderr and exit with the error's code.
"""

import argparse
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from app import __version__
from app.common.errors import ConfigurationError, SurrogateError
from app.common.tracing import run_context
from app.config import SurrogateConfig
from app.surrogate.bootstrap import interval_estimate, validity_test
from app.surrogate.cli.emit import (
    emit_results,
    format_float,
    panel_to_frame,
    write_csv,
    write_json,
)
from app.surrogate.cli.ingest import ingest_csv
from app.surrogate.cli.manifest import MANIFEST_NAME, PhaseTimer, build_manifest
from app.surrogate.design import (
    ConditionalConfig,
    Panel,
    PriorConfig,
    SurrogateBasis,
    validate_panel,
)
from app.surrogate.dlm_core import DiscountConfig
from app.surrogate.estimators import PteResult, check_surrogate_dominance
from app.surrogate.models import (
    BootstrapReport,
    FitReport,
    HomogeneityReport,
    PteReport,
)
from app.surrogate.services.analysis import (
    AnalysisSettings,
    FittedModels,
    estimate_pte,
    fit_models,
    lag_sweep,
    run_bootstrap,
    run_homogeneity,
)
from app.surrogate.services.benchmark import METHODS, run_benchmark
from app.surrogate.simgen import (
    MEASUREMENTS_PER_YEAR,
    GenConfig,
    calibrate,
    generate_panel,
    make_config,
    monte_carlo_truth,
    scenario,
)

logger = getLogger(__name__)

PROG = "surrogate"
EXIT_IO = 3
EXIT_INTERNAL = 4
TRAJECTORIES = ("monotone", "parabola", "random_walk")


class CliParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors as configuration errors."""

    def error(self, message: str):
        error_msg = f"{self.prog}: {message}"
        raise ConfigurationError(error_msg)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(item) for item in text.split(",") if item.strip())
    except ValueError as e:
        error_msg = f"expected comma-separated numbers, got {text!r}"
        raise argparse.ArgumentTypeError(error_msg) from e


def _name_list(text: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _boolean(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    error_msg = f"expected a boolean, got {text!r}"
    raise argparse.ArgumentTypeError(error_msg)


def _common_options(settings: SurrogateConfig) -> CliParser:
    parser = CliParser(add_help=False)
    parser.add_argument(
        "--config", type=Path, help="File of 'key = value' lines setting flag defaults"
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Random seed (default: SURRO_SEED or 0)"
    )
    parser.add_argument("--threads", type=int, default=settings.threads)
    parser.add_argument(
        "--out", type=Path, default=Path("."), help="Output directory"
    )
    return parser


def _panel_options() -> CliParser:
    parser = CliParser(add_help=False)
    parser.add_argument("--panel", type=Path, help="Long-format panel CSV")
    return parser


def _model_options(settings: SurrogateConfig) -> CliParser:
    parser = CliParser(add_help=False)
    group = parser.add_argument_group("working models")
    group.add_argument(
        "--max-lag", type=int, default=0, help="Surrogate lags in the conditional model"
    )
    group.add_argument("--basis", choices=("linear", "bins"), default="linear")
    group.add_argument("--bin-edges", type=_float_list, default=())
    group.add_argument(
        "--per-arm",
        action="store_true",
        help="Separate surrogate coefficients for each arm",
    )
    group.add_argument(
        "--interaction",
        action="store_true",
        help="Add treatment-by-surrogate interaction states",
    )
    group.add_argument(
        "--covariates",
        type=_name_list,
        default=(),
        help="Comma-separated baseline covariates, without the x_ prefix",
    )
    group.add_argument(
        "--shared-discount", type=float, default=settings.shared_discount
    )
    group.add_argument(
        "--subject-discount", type=float, default=settings.subject_discount
    )
    group.add_argument("--prior-kappa", type=float, default=settings.prior_kappa)
    group.add_argument(
        "--level-prior-scale", type=float, default=settings.level_prior_scale
    )
    group.add_argument(
        "--obs-variance",
        type=_float_list,
        default=(1.0, 1.0),
        help="Observation variance of controls and treated, or one shared value",
    )
    group.add_argument(
        "--eps-denom",
        type=float,
        default=settings.denominator_tolerance,
        help="Undefined-ratio guard as a multiple of the outcome SD",
    )
    group.add_argument(
        "--method",
        choices=("joint", "per_time"),
        default="joint",
        help="Recombination of bootstrap posteriors",
    )
    group.add_argument(
        "--memory-limit", type=int, default=settings.joint_memory_limit
    )
    return parser


def _resample_options(settings: SurrogateConfig) -> CliParser:
    parser = CliParser(add_help=False)
    group = parser.add_argument_group("bootstrap")
    group.add_argument(
        "--b",
        type=int,
        default=settings.bootstrap_replicates,
        help="Bootstrap replicates",
    )
    group.add_argument("--level", type=float, default=0.95)
    group.add_argument(
        "--unstratified",
        action="store_true",
        help="Resample subjects without keeping arm sizes fixed",
    )
    return parser


def _generator_options() -> CliParser:
    parser = CliParser(add_help=False)
    group = parser.add_argument_group("generator")
    group.add_argument("--n", type=int, default=100, help="Subjects per arm")
    group.add_argument("--years", type=float, default=1.0, help="Study duration")
    group.add_argument(
        "--horizon", type=int, default=None, help="Last time index; overrides --years"
    )
    group.add_argument("--scenario", type=int, choices=(1, 2, 3, 4, 5), default=None)
    group.add_argument("--trajectory", choices=TRAJECTORIES, default="monotone")
    group.add_argument("--h2-trajectory", choices=TRAJECTORIES, default=None)
    group.add_argument("--target-pte", type=float, default=None)
    group.add_argument("--alpha-shape", type=float, default=1.0)
    group.add_argument("--df-tau", type=float, default=10.0)
    group.add_argument("--obs-scale", dest="V", type=float, default=0.0025)
    group.add_argument("--surrogate-variance", dest="W", type=float, default=None)
    group.add_argument("--phi1", type=float, default=0.9)
    group.add_argument("--phi2", type=float, default=0.5)
    group.add_argument("--beta", type=float, default=1.0)
    group.add_argument("--beta-lag", type=float, default=0.0)
    group.add_argument("--gamma1", type=float, default=None)
    group.add_argument("--gamma2", type=float, default=0.2)
    group.add_argument("--sign", type=int, choices=(-1, 1), default=1)
    group.add_argument(
        "--gamma-parameterization", choices=("rate", "product"), default="rate"
    )
    return parser


def build_parser(
    settings: SurrogateConfig,
) -> tuple[CliParser, dict[str, CliParser]]:
    """The top-level parser and its subcommand parsers by name."""
    parser = CliParser(
        prog=PROG,
        description="Evaluate surrogate markers in two-arm longitudinal trials.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = _common_options(settings)
    panel = _panel_options()
    model = _model_options(settings)
    resample = _resample_options(settings)
    generator = _generator_options()

    subparsers = {}

    simulate = commands.add_parser(
        "simulate", parents=[common, generator], help="Simulate a trial panel"
    )
    simulate.add_argument(
        "--mc-truth",
        type=int,
        default=None,
        help="Subjects per arm of an additional Monte Carlo truth",
    )
    simulate.set_defaults(handler=_simulate)
    subparsers["simulate"] = simulate

    fit = commands.add_parser(
        "fit", parents=[common, panel, model], help="Fit both working models"
    )
    fit.set_defaults(handler=_fit)
    subparsers["fit"] = fit

    pte = commands.add_parser(
        "pte", parents=[common, panel, model], help="Plug-in PTE estimates"
    )
    pte.add_argument(
        "--alpha", type=float, default=0.05, help="Level of the dominance check"
    )
    pte.set_defaults(handler=_pte)
    subparsers["pte"] = pte

    bootstrap = commands.add_parser(
        "bootstrap",
        parents=[common, panel, model, resample],
        help="Bootstrap intervals and the surrogate validity test",
    )
    bootstrap.add_argument("--threshold", type=float, default=0.75)
    bootstrap.add_argument("--alpha", type=float, default=0.05)
    bootstrap.set_defaults(handler=_bootstrap)
    subparsers["bootstrap"] = bootstrap

    homogeneity = commands.add_parser(
        "test-homogeneity",
        parents=[common, panel, model, resample],
        help="Temporal homogeneity tests of the PTE",
    )
    homogeneity.add_argument("--alpha", type=float, default=0.05)
    homogeneity.add_argument("--null-draws", type=int, default=settings.null_draws)
    homogeneity.add_argument(
        "--wald", action="store_true", help="Also run the Wald comparator"
    )
    homogeneity.add_argument(
        "--fixed-tau",
        action="store_true",
        help="Hold tau at its point estimate in the MSD null draws",
    )
    homogeneity.set_defaults(handler=_test_homogeneity)
    subparsers["test-homogeneity"] = homogeneity

    sweep = commands.add_parser(
        "lag-sweep",
        parents=[common, panel, model, resample],
        help="PTE against the maximum surrogate lag",
    )
    sweep.add_argument("--min-per-arm", type=int, default=200)
    sweep.add_argument("--alpha", type=float, default=0.05)
    sweep.add_argument("--null-draws", type=int, default=settings.null_draws)
    sweep.set_defaults(handler=_lag_sweep, b=0, max_lag=None)
    subparsers["lag-sweep"] = sweep

    benchmark = commands.add_parser(
        "benchmark",
        parents=[common, generator, model, resample],
        help="Simulation study against the baseline estimators",
    )
    benchmark.add_argument("--replications", type=int, default=100)
    benchmark.add_argument("--methods", type=_name_list, default=METHODS)
    benchmark.add_argument("--homogeneity", action="store_true")
    benchmark.add_argument("--threshold", type=float, default=0.75)
    benchmark.add_argument("--alpha", type=float, default=0.05)
    benchmark.add_argument("--null-draws", type=int, default=settings.null_draws)
    benchmark.set_defaults(handler=_benchmark)
    subparsers["benchmark"] = benchmark

    return parser, subparsers


def load_config_file(path: str | Path) -> dict[str, tuple[int, str]]:
    """Read flat ``key = value`` lines.

    Blank lines and lines starting with ``#`` are skipped. Keys may be written
    like flags (``max-lag``) or like attributes (``max_lag``).

    Returns:
        Raw value and line number per normalized key
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        error_msg = f"Cannot read config file {path}: {e}"
        raise ConfigurationError(error_msg) from e
    values = {}
    for number, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, separator, value = line.partition("=")
        key = key.strip().lstrip("-").replace("-", "_")
        if not separator or not key:
            error_msg = f"Config file {path}, line {number}: expected 'key = value'"
            raise ConfigurationError(error_msg)
        values[key] = (number, value.strip())
    return values


def _convert(action: argparse.Action, key: str, line: int, text: str) -> Any:
    converter: Callable[[str], Any] = (
        _boolean if action.nargs == 0 else action.type or str
    )
    try:
        value = converter(text)
    except (ValueError, argparse.ArgumentTypeError) as e:
        error_msg = f"Config line {line}, key '{key}': {e}"
        raise ConfigurationError(error_msg) from e
    if action.choices is not None and value not in action.choices:
        error_msg = (
            f"Config line {line}, key '{key}': {value!r} is not one of "
            f"{list(action.choices)}"
        )
        raise ConfigurationError(error_msg)
    return value


def apply_config_file(
    subparsers: dict[str, CliParser], values: dict[str, tuple[int, str]]
) -> None:
    """Install file values as defaults of every subcommand that takes them.

    Flags given on the command line still win; environment settings only fill
    the built-in defaults.

    Raises:
        ConfigurationError: For a key no subcommand accepts or an invalid value
    """
    known = set()
    for subparser in subparsers.values():
        aliases: dict[str, argparse.Action] = {}
        for action in subparser._actions:
            if action.dest == "help":
                continue
            aliases[action.dest] = action
            for option in action.option_strings:
                aliases[option.lstrip("-").replace("-", "_")] = action
        defaults = {}
        for key, (line, text) in values.items():
            action = aliases.get(key)
            if action is None:
                continue
            known.add(key)
            defaults[action.dest] = _convert(action, key, line, text)
        subparser.set_defaults(**defaults)
    unknown = sorted(set(values) - known)
    if unknown:
        error_msg = f"Unknown config keys: {', '.join(unknown)}"
        raise ConfigurationError(error_msg)


def parse_args(argv: Sequence[str], settings: SurrogateConfig) -> argparse.Namespace:
    """Parse a command line with precedence flag, config file, environment."""
    parser, subparsers = build_parser(settings)
    locate = CliParser(add_help=False, allow_abbrev=False)
    locate.add_argument("--config", type=Path)
    located, _ = locate.parse_known_args(argv)
    if located.config is not None:
        apply_config_file(subparsers, load_config_file(located.config))
    return parser.parse_args(argv)


@dataclass
class RunState:
    """Bookkeeping of one command invocation."""

    out: Path
    seed: int
    timer: PhaseTimer = field(default_factory=PhaseTimer)
    inputs: list[Path] = field(default_factory=list)
    outputs: list[Path] = field(default_factory=list)

    def emit(self, report: BaseModel, stem: str) -> None:
        with self.timer.phase("write"):
            for fmt in ("json", "csv"):
                path = self.out / f"{stem}.{fmt}"
                self.outputs.append(emit_results(report, fmt, path))


def _check_open_unit(name: str, value: float, upper: float = 1.0) -> None:
    if not 0.0 < value < upper:
        error_msg = f"{name} must lie in (0, {upper:g}), got {value}"
        raise ConfigurationError(error_msg)


def _pair(values: tuple[float, ...]) -> tuple[float, float]:
    if len(values) == 1:
        return values[0], values[0]
    if len(values) == 2:
        return values[0], values[1]
    error_msg = f"--obs-variance takes one or two values, got {len(values)}"
    raise ConfigurationError(error_msg)


def _analysis_settings(args: argparse.Namespace) -> AnalysisSettings:
    basis = SurrogateBasis(
        kind=args.basis, edges=args.bin_edges, per_arm=args.per_arm
    )
    return AnalysisSettings(
        conditional=ConditionalConfig(
            max_lag=args.max_lag or 0,
            basis=basis,
            covariates=tuple(args.covariates),
            interaction=args.interaction,
        ),
        discounts=DiscountConfig(
            shared_discount=args.shared_discount,
            subject_discount=args.subject_discount,
        ),
        prior=PriorConfig(kappa=args.prior_kappa, level_scale=args.level_prior_scale),
        obs_variance=_pair(args.obs_variance),
        denominator_tolerance=args.eps_denom,
        threads=args.threads,
        method=args.method,
        memory_limit=args.memory_limit,
    )


def _load_panel(args: argparse.Namespace, state: RunState) -> Panel:
    if args.panel is None:
        error_msg = f"{args.command}: --panel is required"
        raise ConfigurationError(error_msg)
    with state.timer.phase("ingest"):
        panel = ingest_csv(args.panel)
    state.inputs.append(args.panel)
    return panel


def _fit_panel(args: argparse.Namespace, state: RunState) -> FittedModels:
    panel = _load_panel(args, state)
    settings = _analysis_settings(args)
    with state.timer.phase("fit"):
        return fit_models(panel, settings)


def _bootstrap_models(args: argparse.Namespace, state: RunState):
    _check_open_unit("--level", args.level)
    models = _fit_panel(args, state)
    with state.timer.phase("bootstrap"):
        result = run_bootstrap(
            models, args.b, args.level, state.seed, stratified=not args.unstratified
        )
    return models, result


def _number(value: float | None) -> str:
    if value is None:
        return "undefined"
    return format_float(value) or "undefined"


def _nullable(values: np.ndarray, undefined: np.ndarray) -> list[float | None]:
    return [None if flag else float(v) for v, flag in zip(values, undefined)]


def pte_report(models: FittedModels, result: PteResult, alpha: float) -> PteReport:
    """Report of plug-in estimates with panel and dominance diagnostics."""
    return PteReport(
        t=list(range(result.delta.values.size)),
        delta=result.delta.values.tolist(),
        delta_r=result.delta_R.values.tolist(),
        lpte=_nullable(result.lpte, result.lpte_undefined),
        cpte=_nullable(result.cpte, result.cpte_undefined),
        lpte_undefined=result.lpte_undefined.tolist(),
        cpte_undefined=result.cpte_undefined.tolist(),
        pte=None if result.pte_undefined else result.pte,
        contrast_imputed=np.flatnonzero(result.delta_R.flagged).tolist(),
        marginal=models.marginal_fit.describe(),
        conditional=models.conditional_fit.describe(),
        panel=validate_panel(models.panel),
        dominance=check_surrogate_dominance(models.panel, alpha),
    )


def _fit(args: argparse.Namespace, state: RunState) -> str:
    models = _fit_panel(args, state)
    paths, variances = {}, {}
    for fit in (models.marginal_fit, models.conditional_fit):
        for name in fit.shared.layout.shared_names:
            key = f"{fit.tag}.{name}"
            paths[key] = fit.shared.path(name).tolist()
            variances[key] = fit.shared.variance_path(name).tolist()
    report = FitReport(
        model={
            "marginal": models.marginal_fit.describe(),
            "conditional": models.conditional_fit.describe(),
        },
        paths=paths,
        variances=variances,
    )
    state.emit(report, "fit")
    return f"states={len(paths)}"


def _pte(args: argparse.Namespace, state: RunState) -> str:
    _check_open_unit("--alpha", args.alpha)
    models = _fit_panel(args, state)
    with state.timer.phase("estimate"):
        report = pte_report(models, estimate_pte(models), args.alpha)
    state.emit(report, "pte")
    return f"pte={_number(report.pte)}"


def _bootstrap(args: argparse.Namespace, state: RunState) -> str:
    _check_open_unit("--alpha", args.alpha, 0.5)
    _, result = _bootstrap_models(args, state)
    one_sided = interval_estimate(
        result.point.pte, result.draws.pte, 1.0 - 2.0 * args.alpha
    )
    validity = validity_test(one_sided, args.threshold, args.alpha)
    report = BootstrapReport(
        replicates=result.draws.replicates,
        level=args.level,
        seed=state.seed,
        stratified=not args.unstratified,
        method=result.method,
        undefined_replicates=result.undefined_count,
        unreliable=result.unreliable,
        pte=result.pte,
        per_time=result.per_time,
        validity=validity,
    )
    state.emit(report, "bootstrap")
    return (
        f"pte={_number(result.pte.point)} ci_low={_number(result.pte.ci_low)} "
        f"ci_high={_number(result.pte.ci_high)} strong_surrogate={validity.reject}"
    )


def _test_homogeneity(args: argparse.Namespace, state: RunState) -> str:
    _check_open_unit("--alpha", args.alpha)
    _, result = _bootstrap_models(args, state)
    with state.timer.phase("homogeneity"):
        diff, msd, wald = run_homogeneity(
            result,
            args.alpha,
            args.null_draws,
            state.seed,
            wald=args.wald,
            fixed_tau=args.fixed_tau,
        )
    report = HomogeneityReport(
        tau_hat=diff.tau_hat,
        delta_diff=diff.values.tolist(),
        sigma=diff.sigma.tolist(),
        msd=msd,
        wald=wald,
    )
    state.emit(report, "homogeneity")
    summary = f"msd_p_value={_number(msd.p_value)} msd_reject={msd.reject}"
    if wald is not None:
        summary += f" wald_p_value={_number(wald.p_value)} wald_reject={wald.reject}"
    return summary


def _lag_sweep(args: argparse.Namespace, state: RunState) -> str:
    _check_open_unit("--level", args.level)
    _check_open_unit("--alpha", args.alpha)
    panel = _load_panel(args, state)
    max_lag = panel.horizon if args.max_lag is None else args.max_lag
    with state.timer.phase("sweep"):
        report = lag_sweep(
            panel,
            _analysis_settings(args),
            max_lag,
            min_per_arm=args.min_per_arm,
            replicates=args.b,
            level=args.level,
            seed=state.seed,
            alpha=args.alpha,
            n_null_draws=args.null_draws,
        )
    state.emit(report, "lag_sweep")
    return f"lags={len(report.rows)} lag_cap={report.lag_cap}"


def _horizon(years: float) -> int:
    if years <= 0:
        error_msg = f"--years must be positive, got {years}"
        raise ConfigurationError(error_msg)
    return round(MEASUREMENTS_PER_YEAR * years)


def generator_config(args: argparse.Namespace, seed: int) -> tuple[GenConfig, str]:
    """Generator configuration and setting label from generator flags.

    ``--scenario`` selects a homogeneity scenario, ``--target-pte`` calibrates
    the direct effect to a true PTE, and otherwise the trajectories are used
    with the given coefficients.
    """
    values: dict[str, Any] = {
        "n_per_arm": args.n,
        "alpha_shape": args.alpha_shape,
        "df_tau": args.df_tau,
        "V": args.V,
        "W": args.W,
        "phi1": args.phi1,
        "phi2": args.phi2,
        "beta": args.beta,
        "beta_lag": args.beta_lag,
        "gamma2": args.gamma2,
        "sign": args.sign,
        "gamma_parameterization": args.gamma_parameterization,
        "seed": seed,
    }
    if args.horizon is not None:
        values["horizon"] = args.horizon
    if args.gamma1 is not None:
        values["gamma1"] = args.gamma1

    if args.scenario is not None:
        if args.target_pte is not None:
            error_msg = "--scenario and --target-pte cannot be combined"
            raise ConfigurationError(error_msg)
        return scenario(args.scenario, args.years, **values), f"scenario{args.scenario}"

    values.setdefault("horizon", _horizon(args.years))
    h2_kind = args.h2_trajectory or args.trajectory
    if args.target_pte is not None:
        base = make_config(**values)
        config = calibrate(args.target_pte, args.trajectory, h2_kind, base)
        return config, f"{args.trajectory}-pte{args.target_pte:g}"
    config = make_config(**values, h1_kind=args.trajectory, h2_kind=h2_kind)
    return config, args.trajectory


def _simulate(args: argparse.Namespace, state: RunState) -> str:
    config, label = generator_config(args, state.seed)
    logger.info("Simulating setting %s with %d subjects per arm", label, args.n)
    with state.timer.phase("simulate"):
        panel, truth = generate_panel(config, args.threads)
    with state.timer.phase("write"):
        state.outputs.append(write_csv(panel_to_frame(panel), state.out / "panel.csv"))
    state.emit(truth, "truth")
    if args.mc_truth is not None:
        with state.timer.phase("monte-carlo"):
            large = monte_carlo_truth(config, args.mc_truth, state.seed, args.threads)
        state.emit(large, "truth_mc")
    return (
        f"subjects={panel.n_subjects} times={panel.n_times} "
        f"true_pte={_number(truth.pte)}"
    )


def _benchmark(args: argparse.Namespace, state: RunState) -> str:
    _check_open_unit("--level", args.level)
    _check_open_unit("--alpha", args.alpha, 0.5)
    config, label = generator_config(args, state.seed)
    with state.timer.phase("benchmark"):
        report = run_benchmark(
            config,
            args.replications,
            args.b,
            setting=label,
            settings=_analysis_settings(args),
            methods=args.methods,
            seed=state.seed,
            level=args.level,
            threshold=args.threshold,
            alpha=args.alpha,
            homogeneity=args.homogeneity,
            n_null_draws=args.null_draws,
        )
    state.emit(report, "benchmark")
    return f"setting={label} rows={len(report.rows)}"


def _resolve_seed(args: argparse.Namespace, settings: SurrogateConfig) -> int:
    if args.seed is not None:
        return args.seed
    if settings.seed is not None:
        return settings.seed
    logger.info("No seed given; using 0")
    return 0


def _snapshot(args: argparse.Namespace, seed: int) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for key, value in vars(args).items():
        if key == "handler":
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        values[key] = value
    values["seed"] = seed
    return values


def _execute(args: argparse.Namespace, settings: SurrogateConfig, run_id: str) -> int:
    if args.threads < 1:
        error_msg = f"--threads must be at least 1, got {args.threads}"
        raise ConfigurationError(error_msg)
    seed = _resolve_seed(args, settings)
    args.out.mkdir(parents=True, exist_ok=True)
    state = RunState(out=args.out, seed=seed)
    if args.config is not None:
        state.inputs.append(args.config)
    logger.info("Running %s with seed %d", args.command, seed)

    summary = args.handler(args, state)

    manifest = build_manifest(
        args.command,
        run_id,
        _snapshot(args, seed),
        state.inputs,
        state.outputs,
        seed,
        state.timer,
    )
    write_json(manifest, args.out / MANIFEST_NAME)
    print(f"{args.command} run_id={run_id} {summary}", flush=True)
    return 0


def report_failure(kind: str, exit_code: int, message: str) -> int:
    """Print the single stderr line of a failed run and return its exit code."""
    text = " ".join(str(message).split())
    print(
        f"surrogate-error kind={kind} exit={exit_code} message={text}",
        file=sys.stderr,
        flush=True,
    )
    return exit_code


def run(argv: Sequence[str] | None = None) -> int:
    """Run one command line and return the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        settings = SurrogateConfig()
    except ValidationError as e:
        return report_failure(
            ConfigurationError.kind,
            ConfigurationError.exit_code,
            f"Invalid SURRO_ environment settings: {e}",
        )

    try:
        args = parse_args(argv, settings)
    except SurrogateError as e:
        return report_failure(e.kind, e.exit_code, str(e))
    except SystemExit as e:
        # --help and --version
        return e.code if isinstance(e.code, int) else 0

    with run_context(args.command) as run_id:
        try:
            return _execute(args, settings, run_id)
        except SurrogateError as e:
            return report_failure(e.kind, e.exit_code, str(e))
        except OSError as e:
            return report_failure("io", EXIT_IO, str(e))
        except Exception as e:
            logger.exception("Unexpected failure in %s", args.command)
            return report_failure("internal", EXIT_INTERNAL, f"{type(e).__name__}: {e}")
