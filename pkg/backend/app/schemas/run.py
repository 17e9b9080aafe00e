"""
Run schemas for the command-line front end.
"""
import math
from enum import Enum
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.exceptions import ValidationFailure
from app.schemas.exponents import BaseStrategy, EstimatorKind


class Command(str, Enum):
    ESTIMATE = "estimate"
    SWEEP = "sweep"
    RATE = "rate"
    SPECTRAL = "spectral"
    EXPERIMENT = "experiment"


class ExperimentId(str, Enum):
    I = "I"
    II = "II"
    III = "III"
    IV = "IV"
    V = "V"
    VI = "VI"
    APPENDIX_F = "appendix-f"
    TABLE = "table"

    @classmethod
    def parse(cls, token: str) -> "ExperimentId":
        text = token.strip()
        if text.lower() == "odd-orders":
            return cls.APPENDIX_F
        for member in cls:
            if member.value.lower() == text.lower():
                return member
        choices = ", ".join(member.value for member in cls)
        raise ValidationFailure(f"unknown experiment {token!r} (choose from {choices})")


class EstimatorColumn(BaseModel):
    """One CSV column: an estimator, optionally with its own base exponent (`b@4`)."""

    model_config = ConfigDict(frozen=True)

    kind: EstimatorKind
    p: Optional[float] = Field(None, description="Base override for this column")

    @classmethod
    def parse(cls, token: str) -> "EstimatorColumn":
        name, sep, base = token.strip().partition("@")
        kind = EstimatorKind.parse(name)
        if not sep:
            return cls(kind=kind)
        try:
            p = float(base)
        except ValueError as e:
            raise ValidationFailure(f"column {token!r}: base {base!r} is not a number") from e
        if not kind.uses_base:
            raise ValidationFailure(f"column {token!r}: {kind.label} takes no base exponent")
        return cls(kind=kind, p=p)

    @property
    def label(self) -> str:
        if self.p is None:
            return self.kind.label
        return f"{self.kind.label}@{self.p:g}"


def parse_columns(text: str) -> List[EstimatorColumn]:
    tokens = [token for token in text.split(",") if token.strip()]
    if not tokens:
        raise ValidationFailure("at least one estimator is required")
    columns = [EstimatorColumn.parse(token) for token in tokens]
    labels = [column.label for column in columns]
    duplicates = sorted({label for label in labels if labels.count(label) > 1})
    if duplicates:
        raise ValidationFailure(f"duplicate estimator columns: {', '.join(duplicates)}")
    return columns


class RunConfig(BaseModel):
    """Everything one CLI invocation needs, validated before any computation."""

    model_config = ConfigDict(frozen=True)

    command: Command
    experiment: Optional[ExperimentId] = None
    p: Optional[float] = Field(None, allow_inf_nan=False)
    q: Optional[float] = Field(None, allow_inf_nan=False)
    n: Optional[int] = Field(None, ge=1)
    n_max: Optional[int] = Field(None, ge=1)
    columns: List[EstimatorColumn] = Field(default_factory=list)
    base: BaseStrategy = BaseStrategy.UNIVERSAL
    alpha: Optional[float] = Field(None, gt=0.0, allow_inf_nan=False)
    spectrum: Optional[str] = None
    out: Optional[str] = None
    exponent: Optional[float] = Field(None, gt=0.0, allow_inf_nan=False)
    window_lo: Optional[int] = Field(None, ge=1)
    window_hi: Optional[int] = Field(None, ge=1)

    @model_validator(mode="after")
    def check_command(self) -> "RunConfig":
        if (self.command is Command.EXPERIMENT) != (self.experiment is not None):
            raise ValueError("an experiment id is required exactly for the experiment command")
        if (self.window_lo is None) != (self.window_hi is None):
            raise ValueError("--window-lo and --window-hi must be given together")
        if self.window_lo is not None and self.window_hi < 10 * self.window_lo:
            raise ValueError("fit window must span at least one decade")
        if self.alpha is not None and self.spectrum is not None:
            raise ValueError("--alpha and --spectrum are mutually exclusive")
        return self

    @property
    def window(self):
        if self.window_lo is None:
            return None
        return self.window_lo, self.window_hi


class ExperimentPreset(BaseModel):
    """One entry of the experiment preset file."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    description: str = ""
    runner: Literal["sweep", "rate", "spectral", "appendix-f", "table"]
    p: Optional[float] = None
    q: Optional[float] = None
    columns: List[str] = Field(default_factory=list)
    exponent: Optional[float] = Field(None, gt=0.0)
    alphas: List[float] = Field(default_factory=list)
    q_values: List[float] = Field(default_factory=list)
    pairs: List[Tuple[float, float]] = Field(default_factory=list)
    order: int = Field(1, ge=0)
    tolerance: float = Field(0.3, gt=0.0)


class EstimateRecord(BaseModel):
    """Single-line result of the estimate command."""

    estimator: str
    p: Optional[float] = None
    q: float
    n: int
    estimate: float
    reference: float
    abs_error: float
    predicted_rate: Optional[float] = None
    theoretical_rate: float
    optimal_region: Optional[bool] = None

    @model_validator(mode="after")
    def check_error(self) -> "EstimateRecord":
        if not math.isfinite(self.abs_error):
            raise ValueError("absolute error must be finite")
        return self
