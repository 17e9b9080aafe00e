"""
Convergence diagnostics: error series, log-log slope fits, scaled-error
plateaus and rate verification.
"""
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core import config
from app.core.exceptions import AnalysisError, DeficiencyError, ValidationFailure
from app.core.logging import get_logger
from app.schemas.analysis import RateReport
from app.schemas.exponents import EstimatorKind, ExponentPair
from app.services.deficiency import EstimationContext, absolute_error, evaluate, theoretical_rate

logger = get_logger(__name__)


@dataclass(frozen=True)
class ErrorSeries:
    """
    Absolute errors of one estimator on an increasing n grid.

    `kind`, `q` and `p` describe the configuration the errors were measured
    for; synthetic series may leave them unset.
    """

    label: str
    n: np.ndarray
    abs_error: np.ndarray
    floor: float
    kind: Optional[EstimatorKind] = None
    q: Optional[float] = None
    p: Optional[float] = None

    def __post_init__(self):
        if self.n.shape != self.abs_error.shape or self.n.ndim != 1:
            raise ValidationFailure("n and abs_error must be one-dimensional arrays of equal length")
        if len(self.n) and (self.n[0] < 1 or np.any(np.diff(self.n) <= 0)):
            raise ValidationFailure(f"{self.label}: n must be positive and strictly increasing")
        if not np.all(np.isfinite(self.abs_error)) or np.any(self.abs_error < 0):
            raise ValidationFailure(f"{self.label}: errors must be finite and >= 0")
        self.n.setflags(write=False)
        self.abs_error.setflags(write=False)

    @classmethod
    def from_points(
        cls,
        label: str,
        n: Sequence[int],
        abs_error: Sequence[float],
        floor: Optional[float] = None,
        **descriptor,
    ) -> "ErrorSeries":
        floor = config.settings.SATURATION_FLOOR if floor is None else floor
        return cls(
            label=label,
            n=np.array(n, dtype=np.int64),
            abs_error=np.array(abs_error, dtype=np.float64),
            floor=floor,
            **descriptor,
        )

    def __len__(self) -> int:
        return len(self.n)

    @property
    def saturated(self) -> np.ndarray:
        return self.abs_error < self.floor

    def in_window(self, window: Tuple[int, int]) -> np.ndarray:
        n_lo, n_hi = window
        return (self.n >= n_lo) & (self.n <= n_hi)


def geometric_grid(n_min: int, n_max: int, points_per_decade: Optional[int] = None) -> np.ndarray:
    """Unique integers spaced geometrically over [n_min, n_max], both ends included."""
    points_per_decade = config.settings.POINTS_PER_DECADE if points_per_decade is None else points_per_decade
    if n_min < 1 or n_max < n_min:
        raise ValidationFailure(f"grid requires 1 <= n_min <= n_max (got {n_min}, {n_max})")
    if points_per_decade < 1:
        raise ValidationFailure(f"points_per_decade must be >= 1 (got {points_per_decade})")
    if n_min == n_max:
        return np.array([n_min], dtype=np.int64)

    count = max(2, math.ceil(math.log10(n_max / n_min) * points_per_decade) + 1)
    raw = np.rint(np.logspace(math.log10(n_min), math.log10(n_max), count))
    grid = np.unique(np.concatenate(([n_min], raw, [n_max])).astype(np.int64))
    return grid[(grid >= n_min) & (grid <= n_max)]


def build_error_series(
    kind: EstimatorKind,
    context: EstimationContext,
    n_grid: Sequence[int],
    reference: Optional[float] = None,
    mode: Optional[str] = None,
    floor: Optional[float] = None,
    label: Optional[str] = None,
) -> ErrorSeries:
    """
    |estimate(n) - zeta(q)| for every n of the grid.

    The reference is the context's target anchor. An explicit `reference`
    forces direct evaluation against that value.
    """
    grid = np.asarray(n_grid, dtype=np.int64)
    label = kind.label if label is None else label
    if grid.size == 0:
        raise ValidationFailure("n grid is empty")
    if np.any(np.diff(grid) <= 0):
        raise ValidationFailure("n grid must be strictly increasing")
    if reference is not None and not math.isfinite(reference):
        raise ValidationFailure(f"reference must be finite (got {reference!r})")

    errors = []
    for n in grid.tolist():
        try:
            if reference is not None:
                error = abs(evaluate(kind, context, n) - reference)
            else:
                error = absolute_error(kind, context, n, mode=mode)
        except DeficiencyError as e:
            raise AnalysisError(f"estimator {label} failed at n={n}: {e}") from e
        if not math.isfinite(error):
            raise AnalysisError(f"estimator {label} produced a non-finite error at n={n}")
        errors.append(error)

    series = ErrorSeries.from_points(label, grid, errors, floor=floor, kind=kind, q=context.q, p=context.p)
    logger.debug("error_series_built", label=label, points=len(series), saturated=int(series.saturated.sum()))
    return series


def fit_slope(series: ErrorSeries, window: Optional[Tuple[int, int]] = None, min_points: Optional[int] = None) -> float:
    """Least-squares slope of log E_n against log n over the unsaturated points of the window."""
    min_points = config.settings.FIT_MIN_POINTS if min_points is None else min_points
    mask = ~series.saturated
    if window is not None:
        mask &= series.in_window(window)

    count = int(mask.sum())
    if count < min_points:
        where = f" in window {window}" if window is not None else ""
        raise AnalysisError(f"{series.label}: {count} unsaturated points{where}, need at least {min_points}")

    log_n = np.log(series.n[mask].astype(np.float64))
    log_e = np.log(series.abs_error[mask])
    slope, _ = np.polyfit(log_n, log_e, 1)
    return float(slope)


def default_fit_window(series: ErrorSeries) -> Tuple[int, int]:
    """
    The last decade [n_hi // 10, n_hi] of the first run of unsaturated points.
    """
    unsaturated = ~series.saturated
    if not unsaturated.any():
        raise AnalysisError(f"{series.label}: every point lies below the saturation floor {series.floor:g}")

    start = int(np.argmax(unsaturated))
    stop = start
    while stop + 1 < len(series) and unsaturated[stop + 1]:
        stop += 1

    n_hi = int(series.n[stop])
    n_lo = n_hi // 10
    if n_lo < 1:
        raise AnalysisError(f"{series.label}: unsaturated points span less than one decade (up to n={n_hi})")
    return n_lo, n_hi


def scaled_error(series: ErrorSeries, exponent: float, window: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """
    Rows (n, n**exponent * E_n) for the unsaturated points, optionally in a window.
    """
    if not exponent > 0:
        raise ValidationFailure(f"scaling exponent must be > 0 (got {exponent})")
    mask = ~series.saturated
    if window is not None:
        mask &= series.in_window(window)
    n = series.n[mask].astype(np.float64)
    return np.column_stack((n, n ** exponent * series.abs_error[mask]))


def plateau_metrics(scaled: np.ndarray) -> Tuple[Optional[float], float]:
    """Median scaled error and its relative spread (max - min) / median."""
    values = scaled[:, 1] if scaled.ndim == 2 else scaled
    if values.size == 0:
        return None, math.inf
    median = float(np.median(values))
    if median <= 0:
        return median, math.inf
    return median, float((values.max() - values.min()) / median)


def verify_rate(
    series: ErrorSeries,
    pair: Optional[ExponentPair] = None,
    window: Optional[Tuple[int, int]] = None,
    exponent: Optional[float] = None,
    tolerance: Optional[float] = None,
    min_points: Optional[int] = None,
) -> RateReport:
    """
    Fit the series' slope and test the plateau of n**r E_n at the theoretical rate r.

    r defaults to theoretical_rate(kind, q, p) of the series; `exponent`
    overrides it.
    """
    tolerance = config.settings.PLATEAU_TOLERANCE if tolerance is None else tolerance
    q = pair.q if pair is not None else series.q
    p = pair.p if pair is not None else series.p

    if exponent is None:
        if series.kind is None or q is None:
            raise AnalysisError(f"{series.label}: no estimator kind to derive a theoretical rate from")
        exponent = theoretical_rate(series.kind, q, p)

    if window is None:
        window = default_fit_window(series)
    else:
        n_lo, n_hi = window
        if n_lo < 1 or n_hi < 10 * n_lo:
            raise ValidationFailure(f"fit window ({n_lo}, {n_hi}) must span at least one decade")

    slope = fit_slope(series, window, min_points=min_points)
    points = int((~series.saturated & series.in_window(window)).sum())
    constant, stability = plateau_metrics(scaled_error(series, exponent, window))

    report = RateReport(
        estimator=series.label,
        fitted_slope=slope,
        theoretical_exponent=-exponent,
        fit_window=window,
        points_in_fit=points,
        plateau_constant=constant,
        plateau_stability=stability,
        plateau_detected=stability <= tolerance,
        saturation_floor_detected=bool(series.saturated.any()),
    )
    logger.info(
        "rate_verified",
        estimator=series.label,
        slope=slope,
        theoretical=-exponent,
        window=list(window),
        plateau=report.plateau_detected,
    )
    return report


def decade_medians(series: ErrorSeries) -> pd.Series:
    """Median error per decade floor(log10 n), indexed by the decade."""
    decades = np.floor(np.log10(series.n.astype(np.float64))).astype(np.int64)
    return pd.Series(series.abs_error).groupby(decades).median()


def is_nonincreasing_trend(series: ErrorSeries) -> bool:
    """Decade medians never increase."""
    medians = decade_medians(series).to_numpy()
    return bool(np.all(np.diff(medians) <= 0))
