"""
Tests for the experiment service: presets, sweeps, spectral runs and the
odd-order sweep.
"""
import math

import numpy as np
import pytest

from app.core.exceptions import ConfigurationError, TableRangeError, ValidationFailure
from app.schemas.run import EstimatorColumn, ExperimentId, RunConfig, parse_columns
from app.services import experiment_service
from app.services.analysis import ErrorSeries, decade_medians, default_fit_window, fit_slope, is_nonincreasing_trend
from app.services.export_service import frame_to_csv

PRESET_IDS = {"I", "II", "III", "IV", "V", "VI", "appendix-f", "table"}


def _slope(frame, column, window=None):
    rows = frame[["n", column]].dropna()
    series = ErrorSeries.from_points(column, rows["n"].to_numpy(), rows[column].to_numpy())
    return fit_slope(series, window or default_fit_window(series))


class TestPresets:
    """Preset loading."""

    def test_preset_file(self, default_settings):
        """Test the shipped preset file."""
        presets = experiment_service.load_presets(settings=default_settings)
        assert set(presets) == PRESET_IDS
        assert presets["II"].columns == ["trunc", "b@2", "b@4"]
        assert presets["appendix-f"].q_values == [3, 5, 7, 9, 11, 13, 15, 17, 19]

    def test_missing_file_falls_back(self, tmp_path):
        """Test the built-in presets when the file is missing."""
        presets = experiment_service.load_presets(str(tmp_path / "missing.yaml"))
        assert set(presets) == PRESET_IDS
        assert presets["VI"].alphas == [2, 3, 4]

    def test_invalid_preset(self, tmp_path):
        """Test unknown preset keys and malformed YAML."""
        path = tmp_path / "bad.yaml"
        path.write_text("experiments:\n  I:\n    runner: sweep\n    colour: red\n")
        with pytest.raises(ConfigurationError):
            experiment_service.load_presets(str(path))
        path.write_text("experiments: [unclosed\n")
        with pytest.raises(ConfigurationError):
            experiment_service.load_presets(str(path))


class TestSweeps:
    """Sweep and estimate runs."""

    def test_estimate_record(self, default_settings):
        """Test B(2,3) at n = 1000."""
        config = RunConfig(command="estimate", p=2, q=3, n=1000, columns=[EstimatorColumn.parse("b")])
        record = experiment_service.run_estimate(config, default_settings)
        assert record.abs_error <= 1e-5
        assert record.predicted_rate == 2
        assert record.optimal_region is True
        assert record.reference == pytest.approx(1.2020569031595942, rel=1e-15)

    def test_estimate_default_base(self, default_settings):
        """Test the explicit-even base when --p is absent."""
        config = RunConfig(command="estimate", q=7, n=100, base="explicit-even", columns=parse_columns("b"))
        assert experiment_service.run_estimate(config, default_settings).p == 6

    def test_experiment_i(self, default_settings):
        """Test zeta(3): four columns, empty EM cell at n = 1, B slope -2."""
        result = experiment_service.run_experiment(ExperimentId.I, RunConfig(command="experiment", experiment="I"), default_settings)
        frame = result.frame
        assert list(frame.columns) == ["n", "trunc", "a", "b", "em:2"]
        assert math.isnan(frame["em:2"].iloc[0])
        assert frame["n"].iloc[-1] == 5000
        assert abs(_slope(frame, "b", (500, 5000)) + 2) <= 0.1

    def test_experiment_ii(self, default_settings):
        """Test zeta(5) with p = 2 against p = 4."""
        result = experiment_service.run_experiment(ExperimentId.II, RunConfig(command="experiment", experiment="II"), default_settings)
        frame = result.frame
        assert abs(_slope(frame, "b@2") + 2) <= 0.15
        assert abs(_slope(frame, "b@4") + 4) <= 0.2
        assert frame["b@4"].iloc[-1] < frame["b@2"].iloc[-1]

    def test_experiment_iv(self, default_settings):
        """Test zeta(7): the explicit even base beats the universal one."""
        result = experiment_service.run_experiment(ExperimentId.IV, RunConfig(command="experiment", experiment="IV"), default_settings)
        frame = result.frame
        assert list(frame.columns) == ["n", "trunc", "b@2", "b@6", "em:2"]
        row = frame[frame["n"] >= 100].iloc[0]
        assert row["b@6"] < row["b@2"]

    def test_single_row(self, default_settings):
        """Test n_max = 1."""
        config = RunConfig(command="sweep", q=3, p=2, n_max=1, columns=parse_columns("trunc,b,em:2"))
        frame = experiment_service.run_sweep(config, default_settings).frame
        assert len(frame) == 1
        assert frame_to_csv(frame).splitlines()[1].endswith(",")

    def test_deterministic_csv(self, default_settings):
        """Test byte-identical output for identical configs."""
        config = RunConfig(command="sweep", q=5, p=2, n_max=2000, columns=parse_columns("trunc,a,b,b2"))
        first = frame_to_csv(experiment_service.run_sweep(config, default_settings).frame)
        second = frame_to_csv(experiment_service.run_sweep(config, default_settings).frame)
        assert first == second
        assert first.startswith("n,trunc,a,b,b2\n")

    def test_requires_q(self, default_settings):
        """Test missing target exponent."""
        with pytest.raises(ValidationFailure):
            experiment_service.run_sweep(RunConfig(command="sweep", columns=parse_columns("b")), default_settings)


class TestRateExperiments:
    """Plateau experiments."""

    def test_experiment_iii(self, default_settings):
        """Test the n^4 plateau for (4, 5)."""
        result = experiment_service.run_experiment(ExperimentId.III, RunConfig(command="experiment", experiment="III"), default_settings)
        assert result.report.plateau_detected
        assert result.report.plateau_stability <= 0.2
        assert list(result.frame.columns) == ["n", "scaled_error"]

    def test_experiment_v(self, default_settings):
        """Test the n^6 plateau for (6, 7) before saturation."""
        result = experiment_service.run_experiment(ExperimentId.V, RunConfig(command="experiment", experiment="V"), default_settings)
        report = result.report
        assert abs(report.fitted_slope + 6) <= 0.3
        assert report.plateau_detected
        assert report.saturation_floor_detected

    def test_summary_table(self, default_settings):
        """Test predicted against observed rates for the optimized pairs."""
        result = experiment_service.run_experiment(ExperimentId.TABLE, RunConfig(command="experiment", experiment="table"), default_settings)
        frame = result.frame
        assert frame["Predicted rate"].tolist() == [2, 4, 6]
        assert frame["Matches"].all()


class TestSpectralExperiments:
    """Spectral runs."""

    def test_alpha_one_matches_classical(self, default_settings):
        """Test byte-identical CSV for alpha = 1 and the classical sweep."""
        columns = parse_columns("b,a,trunc")
        classical = experiment_service.run_sweep(
            RunConfig(command="sweep", p=2, q=3, n_max=1000, columns=columns), default_settings
        )
        spectral = experiment_service.run_spectral(
            RunConfig(command="spectral", p=2, q=3, alpha=1.0, n_max=1000, columns=columns), default_settings
        )
        assert frame_to_csv(spectral.frame) == frame_to_csv(classical.frame)

    def test_experiment_vi(self, default_settings):
        """Test alpha in {2, 3, 4}."""
        result = experiment_service.run_experiment(
            ExperimentId.VI, RunConfig(command="experiment", experiment="VI", n_max=1000), default_settings
        )
        frame = result.frame
        assert list(frame.columns) == ["n", "b[alpha=2]", "b[alpha=3]", "b[alpha=4]"]
        values = frame.drop(columns="n").to_numpy()
        assert np.all(np.isfinite(values)) and np.all(values >= 0)

    def test_explicit_spectrum(self, default_settings, spectrum_file):
        """Test errors of a finite spectrum against its full-array sums."""
        path = spectrum_file(["# squares"] + [str(k * k) for k in range(1, 201)])
        config = RunConfig(command="spectral", p=2, q=3, spectrum=path, columns=parse_columns("b"))
        frame = experiment_service.run_spectral(config, default_settings).frame
        assert frame["n"].iloc[-1] == 200
        assert frame["b"].iloc[-1] == 0.0
        too_long = RunConfig(command="spectral", p=2, q=3, spectrum=path, n_max=500, columns=parse_columns("b"))
        with pytest.raises(TableRangeError):
            experiment_service.run_spectral(too_long, default_settings)


@pytest.fixture(scope="module")
def odd_orders_frame(default_settings):
    """The appendix-f sweep at the default n_max, computed once per module."""
    config = RunConfig(command="experiment", experiment="appendix-f")
    return experiment_service.run_experiment(ExperimentId.APPENDIX_F, config, default_settings).frame


class TestOddOrders:
    """Odd orders q = 3..19 from zeta(2)."""

    def test_columns(self, odd_orders_frame):
        """Test one column per odd q and every n up to 5000."""
        assert list(odd_orders_frame.columns) == ["n"] + [f"q={q}" for q in range(3, 20, 2)]
        assert odd_orders_frame["n"].tolist() == list(range(1, 5001))

    def test_values(self, odd_orders_frame):
        """Test finite nonnegative errors and the q = 3 bound at n = 5000."""
        values = odd_orders_frame.drop(columns="n").to_numpy()
        assert np.all(np.isfinite(values)) and np.all(values >= 0)
        assert odd_orders_frame["q=3"].iloc[-1] <= 1e-5

    def test_trend(self, odd_orders_frame):
        """Test nonincreasing decade medians in every column."""
        n = odd_orders_frame["n"].to_numpy()
        for column in odd_orders_frame.columns[1:]:
            series = ErrorSeries.from_points(column, n, odd_orders_frame[column].to_numpy(), floor=0.0)
            assert is_nonincreasing_trend(series), decade_medians(series)

    def test_q19_second_order_law(self, odd_orders_frame):
        """Test that q = 19 follows zeta(2)^7.5 C(9.5, 2) / n^2 and stays far above the floor."""
        constant = math.exp(7.5 * math.log(math.pi ** 2 / 6)) * 9.5 * 8.5 / 2
        last = odd_orders_frame["q=19"].iloc[-1]
        assert last == pytest.approx(constant / 5000 ** 2, rel=0.01)
        assert last > 1e-6
        assert abs(_slope(odd_orders_frame, "q=19", (500, 5000)) + 2) <= 0.05
