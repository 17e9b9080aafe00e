"""
Export service: CSV emission, eigenvalue-file ingestion and text rendering
of rate reports and summary tables.
"""
import math
import sys
from typing import Optional, TextIO

import pandas as pd

from app.core.exceptions import IOFailure, SpectrumFormatError
from app.core.logging import get_logger
from app.schemas.analysis import RateReport
from app.schemas.spectral import ExplicitSpectrum
from app.services.spectral import parse_spectrum_lines

logger = get_logger(__name__)


def frame_to_csv(frame: pd.DataFrame) -> str:
    """UTF-8 CSV text with LF line endings, shortest round-trip floats and empty cells for NaN."""
    return frame.to_csv(index=False, lineterminator="\n", na_rep="")


def write_csv(frame: pd.DataFrame, path: Optional[str] = None, stream: Optional[TextIO] = None) -> None:
    """Write a result table to `path`, or to `stream` (stdout) when no path is given."""
    text = frame_to_csv(frame)
    if path is None:
        (stream or sys.stdout).write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise IOFailure(f"cannot write output {path}: {e.strerror or e}") from e
    logger.info("csv_written", path=path, rows=len(frame), columns=list(frame.columns))


def load_spectrum(path: str) -> ExplicitSpectrum:
    """Read an eigenvalue file (one positive decimal per line, '#' comments)."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as e:
        raise IOFailure(f"cannot read spectrum {path}: {e.strerror or e}") from e
    except UnicodeDecodeError as e:
        raise SpectrumFormatError(f"spectrum {path} is not UTF-8 text") from e
    spectrum = parse_spectrum_lines(lines)
    logger.debug("spectrum_loaded", path=path, k_max=spectrum.k_max)
    return spectrum


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf"
    return f"{value:.6g}"


def render_rate_report(report: RateReport) -> str:
    n_lo, n_hi = report.fit_window
    lines = [
        f"estimator:            {report.estimator}",
        f"fitted slope:         {report.fitted_slope:.4f}",
        f"theoretical exponent: {report.theoretical_exponent:g}",
        f"fit window:           [{n_lo}, {n_hi}] ({report.points_in_fit} points)",
        f"plateau constant:     {_fmt(report.plateau_constant)}",
        f"plateau stability:    {_fmt(report.plateau_stability)}",
        f"plateau detected:     {'yes' if report.plateau_detected else 'no'}",
        f"saturation floor:     {'reached' if report.saturation_floor_detected else 'not reached'}",
    ]
    return "\n".join(lines) + "\n"


def render_summary_table(frame: pd.DataFrame) -> str:
    """Fixed-width text rendering of the predicted-versus-observed table."""
    formatters = {
        "Base p": lambda v: f"{v:g}",
        "Predicted rate": lambda v: f"{v:g}",
        "Observed slope": lambda v: f"{v:.3f}",
        "Matches": lambda v: "yes" if v else "no",
    }
    return frame.to_string(index=False, formatters=formatters) + "\n"
