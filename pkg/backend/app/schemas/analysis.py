"""
Convergence analysis schemas.
"""
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class RateReport(BaseModel):
    """Outcome of a rate verification over one fit window."""

    model_config = ConfigDict(frozen=True)

    estimator: str
    fitted_slope: float
    theoretical_exponent: float = Field(..., description="Negative predicted rate")
    fit_window: Tuple[int, int]
    points_in_fit: int
    plateau_constant: Optional[float] = None
    plateau_stability: float = Field(..., ge=0.0)
    plateau_detected: bool
    saturation_floor_detected: bool

    @model_validator(mode="after")
    def check_window(self) -> "RateReport":
        n_lo, n_hi = self.fit_window
        if n_lo < 1 or n_hi < 10 * n_lo:
            raise ValueError("fit window must span at least one decade")
        return self

    def matches(self, tolerance: float) -> bool:
        return abs(self.fitted_slope - self.theoretical_exponent) <= tolerance
