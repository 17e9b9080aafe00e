"""
zeta-deficiency command-line entry point.

Subcommands: estimate, sweep, rate, spectral, experiment.
Exit codes: 0 success, 1 analysis failure, 2 validation, 3 I/O, 4 data format.
"""
import argparse
import sys
from typing import Any, Dict, List, Optional

from pydantic import ValidationError

from app.core.config import Settings, activate_settings, load_settings
from app.core.exceptions import DeficiencyError
from app.core.logging import configure_logging, get_logger
from app.schemas.exponents import BaseStrategy
from app.schemas.run import Command, EstimatorColumn, ExperimentId, RunConfig, parse_columns
from app.services import experiment_service
from app.services.export_service import render_rate_report, render_summary_table, write_csv

logger = get_logger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("run configuration")
    group.add_argument("--config", help="Config file of key = value lines")
    group.add_argument("--out", help="Output path (CSV); stdout when omitted")
    group.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")
    group.add_argument("--error-mode", choices=["residual", "direct"], help="Error evaluation mode")
    group.add_argument("--reference-n", type=int, help="N_ref of the reference oracle")
    group.add_argument("--reference-m", type=int, help="M_ref of the reference oracle")
    group.add_argument("--saturation-floor", type=float, help="Absolute error floor for fits")
    group.add_argument("--points-per-decade", type=int, help="Geometric grid density")


def _add_pair(parser: argparse.ArgumentParser, need_n: bool = False) -> None:
    parser.add_argument("--p", type=float, help="Base exponent")
    parser.add_argument("--q", type=float, help="Target exponent")
    if need_n:
        parser.add_argument("--n", type=int, help="Number of terms")
    else:
        parser.add_argument("--n-max", type=int, help="Largest n of the grid")


def _add_fit(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--exponent", type=float, help="Scaling exponent for the plateau test")
    parser.add_argument("--window-lo", type=int, help="Fit window lower end")
    parser.add_argument("--window-hi", type=int, help="Fit window upper end")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zeta-deficiency",
        description="Deficiency-based approximation of zeta values and convergence diagnostics.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    bases = [strategy.value for strategy in BaseStrategy]

    estimate = subparsers.add_parser("estimate", help="Single estimate with reference and error")
    _add_pair(estimate, need_n=True)
    estimate.add_argument("--estimator", default="b", help="trunc, a, b, b2, bk:<K>, em:<M>")
    estimate.add_argument("--base", choices=bases, default=BaseStrategy.UNIVERSAL.value)
    _add_common(estimate)

    sweep = subparsers.add_parser("sweep", help="Absolute-error CSV over a geometric n grid")
    _add_pair(sweep)
    sweep.add_argument("--estimators", required=True, help="Comma list, e.g. trunc,a,b,em:2,b@4")
    sweep.add_argument("--base", choices=bases, default=BaseStrategy.UNIVERSAL.value)
    _add_common(sweep)

    rate = subparsers.add_parser("rate", help="Slope fit and plateau test for one estimator")
    _add_pair(rate)
    rate.add_argument("--estimator", default="b", help="trunc, a, b, b2, bk:<K>, em:<M>")
    rate.add_argument("--base", choices=bases, default=BaseStrategy.UNIVERSAL.value)
    _add_fit(rate)
    _add_common(rate)

    spectral = subparsers.add_parser("spectral", help="Spectral zeta error CSV")
    _add_pair(spectral)
    source = spectral.add_mutually_exclusive_group(required=True)
    source.add_argument("--alpha", type=float, help="Power-law growth lambda_k = k**alpha")
    source.add_argument("--spectrum", help="Eigenvalue file, one value per line")
    spectral.add_argument("--estimators", default="b", help="Comma list of estimators")
    _add_common(spectral)

    experiment = subparsers.add_parser("experiment", help="Run a preset experiment")
    experiment.add_argument("id", help="I, II, III, IV, V, VI, appendix-f (alias odd-orders) or table")
    experiment.add_argument("--n-max", type=int, help="Largest n of the grid")
    _add_fit(experiment)
    _add_common(experiment)
    return parser


def _settings_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "LOG_LEVEL": args.log_level,
        "ERROR_MODE": args.error_mode,
        "REFERENCE_N": args.reference_n,
        "REFERENCE_M": args.reference_m,
        "SATURATION_FLOOR": args.saturation_floor,
        "POINTS_PER_DECADE": args.points_per_decade,
    }


def _run_config(args: argparse.Namespace) -> RunConfig:
    command = Command(args.command)
    values: Dict[str, Any] = {"command": command, "out": args.out}
    for name in ("p", "q", "n", "n_max", "alpha", "spectrum", "exponent", "window_lo", "window_hi"):
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if getattr(args, "base", None) is not None:
        values["base"] = args.base
    if getattr(args, "estimator", None) is not None:
        values["columns"] = [EstimatorColumn.parse(args.estimator)]
    if getattr(args, "estimators", None) is not None:
        values["columns"] = parse_columns(args.estimators)
    if command is Command.EXPERIMENT:
        values["experiment"] = ExperimentId.parse(args.id)
    return RunConfig(**values)


def _dispatch(config: RunConfig, settings: Settings) -> int:
    if config.command is Command.ESTIMATE:
        record = experiment_service.run_estimate(config, settings)
        print(record.model_dump_json())
        return 0

    if config.command is Command.SWEEP:
        result = experiment_service.run_sweep(config, settings)
    elif config.command is Command.RATE:
        result = experiment_service.run_rate(config, settings)
    elif config.command is Command.SPECTRAL:
        result = experiment_service.run_spectral(config, settings)
    else:
        result = experiment_service.run_experiment(config.experiment, config, settings)

    if result.report is not None:
        sys.stdout.write(render_rate_report(result.report))
        if config.out is not None:
            write_csv(result.frame, config.out)
    elif config.experiment is ExperimentId.TABLE:
        sys.stdout.write(render_summary_table(result.frame))
        if config.out is not None:
            write_csv(result.frame, config.out)
    else:
        write_csv(result.frame, config.out)
    return 0


def _describe(error: ValidationError) -> str:
    return "; ".join(item["msg"].removeprefix("Value error, ") for item in error.errors())


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = activate_settings(load_settings(args.config, overrides=_settings_overrides(args)))
        configure_logging(settings.LOG_LEVEL, json=settings.LOG_JSON)
        config = _run_config(args)
        logger.debug("run_configured", command=config.command.value)
        return _dispatch(config, settings)
    except DeficiencyError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"error: {_describe(e)}", file=sys.stderr)
        return 2


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
