"""
Tests for error series, slope fits, plateau detection and rate verification.
"""
import math

import numpy as np
import pytest

from app.core.exceptions import AnalysisError, ValidationFailure
from app.schemas.analysis import RateReport
from app.schemas.exponents import EstimatorKind, ExponentPair
from app.services.analysis import (
    ErrorSeries,
    build_error_series,
    decade_medians,
    default_fit_window,
    fit_slope,
    geometric_grid,
    plateau_metrics,
    scaled_error,
    verify_rate,
)

B = EstimatorKind.deficiency_b()
TRUNC = EstimatorKind.truncation()


def _synthetic(constant, exponent, n_max=1000, floor=1e-16):
    grid = geometric_grid(1, n_max)
    return ErrorSeries.from_points("synthetic", grid, constant * grid.astype(float) ** -exponent, floor=floor)


def _b_series(context_factory, p, q, n_max=5000):
    context = context_factory(q, n_max, p=p)
    return build_error_series(B, context, geometric_grid(1, n_max))


class TestGeometricGrid:
    """Log-spaced integer grids."""

    def test_ends_and_order(self):
        """Test both ends, strict increase and density."""
        grid = geometric_grid(1, 5000, 40)
        assert grid[0] == 1 and grid[-1] == 5000
        assert np.all(np.diff(grid) > 0)
        assert len(grid) > 100

    def test_degenerate(self):
        """Test a one-point grid and invalid bounds."""
        assert geometric_grid(1, 1).tolist() == [1]
        with pytest.raises(ValidationFailure):
            geometric_grid(0, 10)
        with pytest.raises(ValidationFailure):
            geometric_grid(10, 5)


class TestErrorSeries:
    """Error series construction."""

    def test_invariants(self):
        """Test increasing n and finite nonnegative errors."""
        with pytest.raises(ValidationFailure):
            ErrorSeries.from_points("x", [1, 1], [0.1, 0.1])
        with pytest.raises(ValidationFailure):
            ErrorSeries.from_points("x", [1, 2], [0.1, -0.1])
        with pytest.raises(ValidationFailure):
            ErrorSeries.from_points("x", [1, 2], [0.1, float("nan")])

    def test_truncation_errors(self, context_factory):
        """Test truncation errors for q = 3 against brute-force tails."""
        series = build_error_series(TRUNC, context_factory(3, 100), [10, 100])
        for n, error in zip(series.n, series.abs_error):
            tail = math.fsum(k ** -3.0 for k in range(int(n) + 1, 1_000_001)) + 0.5e-12
            assert error == pytest.approx(tail, rel=1e-9)
        assert series.abs_error[0] == pytest.approx(4.52e-3, rel=1e-2)
        assert series.abs_error[1] == pytest.approx(4.95e-5, rel=1e-2)

    def test_single_point_grid(self, context_factory):
        """Test B on the trivial grid {1}."""
        series = build_error_series(B, context_factory(3, 10, p=2), [1])
        assert len(series) == 1
        assert math.isfinite(series.abs_error[0])

    def test_euler_maclaurin_accuracy(self, context_factory):
        """Test EM(2) at n = 100 below 1e-10."""
        series = build_error_series(EstimatorKind.euler_maclaurin(2), context_factory(3, 100), [100])
        assert series.abs_error[0] <= 1e-10

    def test_failure_names_n(self, context_factory):
        """Test that an estimator failure aborts with the offending n."""
        with pytest.raises(AnalysisError, match="n=1"):
            build_error_series(EstimatorKind.euler_maclaurin(2), context_factory(3, 100), [1, 10])

    def test_grid_validation(self, context_factory):
        """Test empty and unordered grids."""
        with pytest.raises(ValidationFailure):
            build_error_series(TRUNC, context_factory(3, 100), [])
        with pytest.raises(ValidationFailure):
            build_error_series(TRUNC, context_factory(3, 100), [10, 5])

    def test_explicit_reference(self, context_factory):
        """Test direct evaluation against a caller-supplied reference."""
        context = context_factory(3, 100)
        series = build_error_series(TRUNC, context, [2], reference=1.2)
        assert series.abs_error[0] == pytest.approx(0.075, rel=1e-12)


class TestFitSlope:
    """Least-squares slopes in log-log space."""

    @pytest.mark.parametrize("constant,exponent", [(1.0, 2), (3.0, 4)])
    def test_exact_power_law(self, constant, exponent):
        """Test recovery of the exponent to 1e-12."""
        assert fit_slope(_synthetic(constant, exponent)) == pytest.approx(-exponent, abs=1e-12)

    def test_scale_invariance(self):
        """Test invariance under a constant factor."""
        grid = geometric_grid(1, 1000)
        errors = 1.0 / (grid * np.log(grid + 1.0))
        base = fit_slope(ErrorSeries.from_points("x", grid, errors))
        scaled = fit_slope(ErrorSeries.from_points("x", grid, 7.5 * errors))
        assert scaled == pytest.approx(base, abs=1e-12)

    def test_saturated_points_excluded(self):
        """Test that points below the floor never enter the fit."""
        series = _synthetic(1.0, 6, n_max=5000)
        assert series.saturated.any()
        assert fit_slope(series) == pytest.approx(-6.0, abs=1e-12)

    def test_insufficient_points(self):
        """Test windows with fewer than five usable points."""
        series = ErrorSeries.from_points("x", [1, 2, 3, 4], [1.0, 0.5, 0.3, 0.25])
        with pytest.raises(AnalysisError):
            fit_slope(series)
        saturated = ErrorSeries.from_points("x", [1, 2, 3, 4, 5, 6], [1e-17] * 6)
        with pytest.raises(AnalysisError):
            default_fit_window(saturated)


class TestPlateau:
    """Scaled errors and plateau metrics."""

    def test_constant_plateau(self):
        """Test C n^-4 scaled by n^4."""
        scaled = scaled_error(_synthetic(3.0, 4), 4)
        assert np.allclose(scaled[:, 1], 3.0, rtol=1e-12)
        constant, spread = plateau_metrics(scaled)
        assert constant == pytest.approx(3.0)
        assert spread <= 1e-12

    def test_empty_after_saturation(self):
        """Test that a fully saturated series scales to an empty table."""
        series = ErrorSeries.from_points("x", [1, 2, 3], [1e-17, 1e-18, 1e-19])
        assert scaled_error(series, 2).shape == (0, 2)
        assert plateau_metrics(scaled_error(series, 2)) == (None, math.inf)

    def test_exponent_validation(self):
        """Test a nonpositive scaling exponent."""
        with pytest.raises(ValidationFailure):
            scaled_error(_synthetic(1.0, 2), 0)

    def test_b45_plateau(self, context_factory):
        """Test n^4 |B_n(4,5) - zeta(5)| over [500, 5000]."""
        series = _b_series(context_factory, 4, 5)
        _, spread = plateau_metrics(scaled_error(series, 4, window=(500, 5000)))
        assert spread <= 0.15


class TestVerifyRate:
    """Rate reports against the convergence law."""

    def test_synthetic_self_test(self):
        """Test an injected n^-2 series."""
        report = verify_rate(_synthetic(1.0, 2), exponent=2)
        assert report.fitted_slope == pytest.approx(-2.0, abs=1e-12)
        assert report.plateau_constant == pytest.approx(1.0)
        assert report.plateau_detected
        assert not report.saturation_floor_detected

    def test_zeta3(self, context_factory):
        """Test B(2,3) over [500, 5000]."""
        series = _b_series(context_factory, 2, 3)
        report = verify_rate(series, ExponentPair(p=2, q=3), window=(500, 5000))
        assert abs(report.fitted_slope + 2) <= 0.1
        assert report.theoretical_exponent == -2
        assert report.matches(0.1)

    def test_zeta5_bases(self, context_factory):
        """Test B(2,5) and B(4,5) over their last unsaturated decade."""
        report_2 = verify_rate(_b_series(context_factory, 2, 5))
        report_4 = verify_rate(_b_series(context_factory, 4, 5))
        assert abs(report_2.fitted_slope + 2) <= 0.15
        assert abs(report_4.fitted_slope + 4) <= 0.2
        assert report_4.plateau_detected
        assert report_4.plateau_stability <= 0.2

    def test_zeta7_saturation(self, context_factory):
        """Test B(6,7) on the pre-saturation window with the floor flagged."""
        report = verify_rate(_b_series(context_factory, 6, 7), ExponentPair(p=6, q=7))
        assert abs(report.fitted_slope + 6) <= 0.3
        assert report.saturation_floor_detected
        assert report.fit_window[1] < 5000
        assert report.plateau_detected

    @pytest.mark.parametrize("q", [3, 5, 7])
    def test_truncation_self_test(self, context_factory, q):
        """Test the truncation law -(q-1)."""
        series = build_error_series(TRUNC, context_factory(q, 5000), geometric_grid(1, 5000))
        report = verify_rate(series)
        assert abs(report.fitted_slope + (q - 1)) <= 0.1

    def test_window_validation(self):
        """Test a window shorter than one decade."""
        with pytest.raises(ValidationFailure):
            verify_rate(_synthetic(1.0, 2), exponent=2, window=(100, 500))
        with pytest.raises(AnalysisError):
            verify_rate(_synthetic(1.0, 2))

    def test_report_schema(self):
        """Test the decade constraint on the report itself."""
        with pytest.raises(ValueError):
            RateReport(
                estimator="b",
                fitted_slope=-2.0,
                theoretical_exponent=-2.0,
                fit_window=(100, 500),
                points_in_fit=10,
                plateau_stability=0.0,
                plateau_detected=True,
                saturation_floor_detected=False,
            )


class TestDecadeMedians:
    """Per-decade medians."""

    def test_grouping(self):
        """Test decades of an n^-1 series."""
        n = np.arange(1, 101)
        medians = decade_medians(ErrorSeries.from_points("x", n, 1.0 / n))
        assert medians.index.tolist() == [0, 1, 2]
        assert medians.loc[0] == pytest.approx(0.2)
        assert medians.loc[2] == pytest.approx(0.01)
        assert medians.is_monotonic_decreasing
