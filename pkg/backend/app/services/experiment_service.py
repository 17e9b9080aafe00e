"""
Experiment service: runs estimate, sweep, rate and spectral configurations
and the preset experiments, returning records and tables for the CLI.

Presets are read from YAML with a built-in fallback.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
import yaml
from pydantic import ValidationError

from app.core import config as core_config
from app.core.config import Settings
from app.core.exceptions import ConfigurationError, ValidationFailure
from app.core.logging import get_logger
from app.schemas.analysis import RateReport
from app.schemas.exponents import EstimatorKind, EstimatorTag, ExponentPair
from app.schemas.run import EstimateRecord, EstimatorColumn, ExperimentId, ExperimentPreset, RunConfig
from app.schemas.spectral import ExplicitSpectrum, PowerLawSpectrum, SpectralPair
from app.services.analysis import build_error_series, geometric_grid, scaled_error, verify_rate
from app.services.deficiency import (
    EstimationContext,
    absolute_error,
    build_context,
    deficiency_incremental,
    estimates_from_series,
    evaluate,
    in_optimal_region,
    predicted_rate,
    recommended_base,
    theoretical_rate,
)
from app.services.export_service import load_spectrum
from app.services.series_core import build_table, reference_zeta
from app.services.spectral import spectral_context

logger = get_logger(__name__)


@dataclass(frozen=True)
class RunResult:
    """A result table plus, for rate runs, the verification report."""

    frame: pd.DataFrame
    report: Optional[RateReport] = None


def _default_presets() -> Dict:
    """Built-in presets used when the preset file is missing."""
    return {
        "experiments": {
            "I": {"runner": "sweep", "q": 3, "p": 2, "columns": ["trunc", "a", "b", "em:2"]},
            "II": {"runner": "sweep", "q": 5, "columns": ["trunc", "b@2", "b@4"]},
            "III": {"runner": "rate", "p": 4, "q": 5, "columns": ["b"], "exponent": 4},
            "IV": {"runner": "sweep", "q": 7, "columns": ["trunc", "b@2", "b@6", "em:2"]},
            "V": {"runner": "rate", "p": 6, "q": 7, "columns": ["b"], "exponent": 6},
            "VI": {"runner": "spectral", "p": 2, "q": 3, "columns": ["b"], "alphas": [2, 3, 4]},
            "appendix-f": {"runner": "appendix-f", "p": 2, "q_values": [3, 5, 7, 9, 11, 13, 15, 17, 19], "order": 1},
            "table": {"runner": "table", "columns": ["b"], "pairs": [[2, 3], [4, 5], [6, 7]], "tolerance": 0.3},
        }
    }


def load_presets(path: Optional[str] = None, settings: Optional[Settings] = None) -> Dict[str, ExperimentPreset]:
    """Load experiment presets from YAML, falling back to the built-in set."""
    if path is None:
        path = (settings or core_config.settings).EXPERIMENTS_CONFIG_PATH
    try:
        with open(path, "r") as f:
            raw = yaml.safe_load(f)
    except FileNotFoundError:
        logger.warning("experiment_presets_missing", path=path)
        raw = _default_presets()
    except yaml.YAMLError as e:
        raise ConfigurationError(f"cannot parse experiment presets {path}: {e}") from e

    experiments = (raw or {}).get("experiments")
    if not isinstance(experiments, dict):
        raise ConfigurationError(f"experiment presets {path} must define an 'experiments' mapping")
    try:
        return {str(key): ExperimentPreset(**value) for key, value in experiments.items()}
    except (TypeError, ValidationError) as e:
        raise ConfigurationError(f"invalid experiment preset in {path}: {e}") from e


def _resolve_base(column: EstimatorColumn, config: RunConfig, q: float) -> Optional[float]:
    if not column.kind.uses_base:
        return None
    if column.p is not None:
        return column.p
    if config.p is not None:
        return config.p
    return recommended_base(q, config.base)


def _require_q(config: RunConfig) -> float:
    if config.q is None:
        raise ValidationFailure(f"{config.command.value} requires --q")
    return config.q


def _context(q: float, n_max: int, p: Optional[float], settings: Settings) -> EstimationContext:
    return build_context(q, n_max, p=p, n_ref=settings.REFERENCE_N, m_ref=settings.REFERENCE_M)


def _column_errors(kind: EstimatorKind, context: EstimationContext, grid: np.ndarray, settings: Settings) -> np.ndarray:
    """Absolute errors on the grid; Euler-Maclaurin cells below n = 2 stay empty."""
    errors = np.full(len(grid), np.nan)
    mask = grid >= 2 if kind.tag is EstimatorTag.EULER_MACLAURIN else np.ones(len(grid), dtype=bool)
    if mask.any():
        series = build_error_series(
            kind, context, grid[mask], mode=settings.ERROR_MODE, floor=settings.SATURATION_FLOOR
        )
        errors[mask] = series.abs_error
    return errors


def run_estimate(config: RunConfig, settings: Settings) -> EstimateRecord:
    """One estimate with its reference, error, predicted rate and optimal-region flag."""
    q = _require_q(config)
    if config.n is None:
        raise ValidationFailure("estimate requires --n")
    column = config.columns[0] if config.columns else EstimatorColumn(kind=EstimatorKind.deficiency_b())
    kind = column.kind
    p = _resolve_base(column, config, q)

    pair = ExponentPair(p=p, q=q) if p is not None else None
    context = _context(q, config.n, p, settings)
    estimate = evaluate(kind, context, config.n)
    record = EstimateRecord(
        estimator=column.label,
        p=p,
        q=q,
        n=config.n,
        estimate=estimate,
        reference=context.target.value,
        abs_error=absolute_error(kind, context, config.n, mode=settings.ERROR_MODE),
        predicted_rate=predicted_rate(pair) if pair else None,
        theoretical_rate=theoretical_rate(kind, q, p),
        optimal_region=in_optimal_region(pair) if pair else None,
    )
    logger.info("estimate_computed", estimator=record.estimator, q=q, p=p, n=config.n, error=record.abs_error)
    return record


def _grid(n_max: int, settings: Settings) -> np.ndarray:
    return geometric_grid(1, n_max, settings.POINTS_PER_DECADE)


def _sweep_frame(q: float, columns: List[EstimatorColumn], config: RunConfig, n_max: int, settings: Settings) -> pd.DataFrame:
    grid = _grid(n_max, settings)
    contexts: Dict[Optional[float], EstimationContext] = {}
    data = {"n": grid}
    for column in columns:
        p = _resolve_base(column, config, q)
        if p not in contexts:
            contexts[p] = _context(q, n_max, p, settings)
        data[column.label] = _column_errors(column.kind, contexts[p], grid, settings)
    return pd.DataFrame(data)


def run_sweep(config: RunConfig, settings: Settings) -> RunResult:
    """Absolute-error table, one column per estimator, on a geometric n grid."""
    q = _require_q(config)
    if not config.columns:
        raise ValidationFailure("sweep requires at least one estimator")
    n_max = config.n_max or settings.DEFAULT_N_MAX
    frame = _sweep_frame(q, config.columns, config, n_max, settings)
    logger.info("sweep_completed", q=q, columns=[c.label for c in config.columns], rows=len(frame))
    return RunResult(frame=frame)


def run_rate(config: RunConfig, settings: Settings) -> RunResult:
    """Rate verification for one estimator plus its scaled-error table."""
    q = _require_q(config)
    column = config.columns[0] if config.columns else EstimatorColumn(kind=EstimatorKind.deficiency_b())
    p = _resolve_base(column, config, q)
    pair = ExponentPair(p=p, q=q) if p is not None else None
    n_max = config.n_max or settings.DEFAULT_N_MAX

    context = _context(q, n_max, p, settings)
    series = build_error_series(
        column.kind,
        context,
        _grid(n_max, settings),
        mode=settings.ERROR_MODE,
        floor=settings.SATURATION_FLOOR,
        label=column.label,
    )
    report = verify_rate(
        series,
        pair=pair,
        window=config.window,
        exponent=config.exponent,
        tolerance=settings.PLATEAU_TOLERANCE,
        min_points=settings.FIT_MIN_POINTS,
    )
    scaled = scaled_error(series, -report.theoretical_exponent)
    frame = pd.DataFrame({"n": scaled[:, 0].astype(np.int64), "scaled_error": scaled[:, 1]})
    return RunResult(frame=frame, report=report)


def _spectral_source(config: RunConfig):
    if config.spectrum is not None:
        return load_spectrum(config.spectrum)
    if config.alpha is None:
        raise ValidationFailure("spectral requires --alpha or --spectrum")
    return PowerLawSpectrum(alpha=config.alpha)


def _spectral_frame(
    pair: SpectralPair,
    columns: List[EstimatorColumn],
    n_max: int,
    settings: Settings,
    suffix: str = "",
) -> pd.DataFrame:
    for column in columns:
        if column.p is not None:
            raise ValidationFailure(f"column {column.label}: spectral runs take the base from --p")
        if column.kind.tag is EstimatorTag.EULER_MACLAURIN and isinstance(pair.source, ExplicitSpectrum):
            raise ValidationFailure("Euler-Maclaurin columns need a power-law spectrum")

    grid = _grid(n_max, settings)
    context = spectral_context(pair, n_max, n_ref=settings.REFERENCE_N, m_ref=settings.REFERENCE_M)
    data = {"n": grid}
    for column in columns:
        data[column.label + suffix] = _column_errors(column.kind, context, grid, settings)
    return pd.DataFrame(data)


def run_spectral(config: RunConfig, settings: Settings) -> RunResult:
    """
    Error table for a spectral configuration: power-law errors against
    zeta(alpha*q), explicit-spectrum errors against full-array sums.
    """
    q = _require_q(config)
    source = _spectral_source(config)
    pair = SpectralPair(source=source, p=config.p if config.p is not None else 2.0, q=q)
    n_max = config.n_max or settings.DEFAULT_N_MAX
    if isinstance(source, ExplicitSpectrum) and config.n_max is None:
        n_max = min(n_max, source.k_max)
    columns = config.columns or [EstimatorColumn(kind=EstimatorKind.deficiency_b())]

    frame = _spectral_frame(pair, columns, n_max, settings)
    logger.info("spectral_completed", source=source.kind, p=pair.p, q=q, rows=len(frame))
    return RunResult(frame=frame)


def run_odd_orders(preset: ExperimentPreset, n_max: int, settings: Settings) -> RunResult:
    """
    Odd-order sweep with base p = 2: every n in [1, n_max], deficiencies from
    the incremental recurrence, errors in plain binary64.
    """
    p = preset.p if preset.p is not None else 2.0
    base_table = build_table(p, n_max)
    zeta_p = reference_zeta(p, settings.REFERENCE_N, settings.REFERENCE_M)
    data = {"n": np.arange(1, n_max + 1, dtype=np.int64)}
    for q in preset.q_values:
        pair = ExponentPair(p=p, q=q)
        series = deficiency_incremental(pair, base_table, n_max)
        estimates = estimates_from_series(series, base_table, zeta_p, preset.order)
        reference = reference_zeta(q, settings.REFERENCE_N, settings.REFERENCE_M)
        data[f"q={q:g}"] = np.abs(estimates[1:] - reference)
    logger.info("odd_orders_completed", p=p, q_values=list(preset.q_values), n_max=n_max)
    return RunResult(frame=pd.DataFrame(data))


def run_summary_table(preset: ExperimentPreset, n_max: int, settings: Settings) -> RunResult:
    """Predicted against observed rates for the optimized pairs."""
    rows = []
    for p, q in preset.pairs:
        config = RunConfig(command="rate", p=p, q=q, n_max=n_max, columns=[EstimatorColumn.parse(c) for c in preset.columns])
        report = run_rate(config, settings).report
        rows.append(
            {
                "Target": f"zeta({q:g})",
                "Base p": p,
                "Predicted rate": predicted_rate(ExponentPair(p=p, q=q)),
                "Observed slope": report.fitted_slope,
                "Matches": report.matches(preset.tolerance),
            }
        )
    return RunResult(frame=pd.DataFrame(rows))


def run_experiment(experiment: ExperimentId, config: RunConfig, settings: Settings) -> RunResult:
    """Run a preset experiment; --n-max, window and exponent flags override the preset."""
    presets = load_presets(settings=settings)
    preset = presets.get(experiment.value)
    if preset is None:
        raise ConfigurationError(f"no preset defined for experiment {experiment.value}")
    n_max = config.n_max or settings.DEFAULT_N_MAX
    columns = [EstimatorColumn.parse(token) for token in preset.columns]
    logger.info("experiment_started", experiment=experiment.value, runner=preset.runner, n_max=n_max)

    if preset.runner == "appendix-f":
        return run_odd_orders(preset, n_max, settings)
    if preset.runner == "table":
        return run_summary_table(preset, n_max, settings)

    run_config = RunConfig(
        command=preset.runner,
        p=preset.p,
        q=preset.q,
        n_max=n_max,
        columns=columns,
        exponent=config.exponent if config.exponent is not None else preset.exponent,
        window_lo=config.window_lo,
        window_hi=config.window_hi,
    )
    if preset.runner == "sweep":
        return run_sweep(run_config, settings)
    if preset.runner == "rate":
        return run_rate(run_config, settings)

    frames = []
    for alpha in preset.alphas:
        pair = SpectralPair(source=PowerLawSpectrum(alpha=alpha), p=preset.p, q=preset.q)
        frame = _spectral_frame(pair, columns, n_max, settings, suffix=f"[alpha={alpha:g}]")
        frames.append(frame if not frames else frame.drop(columns="n"))
    return RunResult(frame=pd.concat(frames, axis=1))
