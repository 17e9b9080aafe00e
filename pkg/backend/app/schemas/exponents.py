"""
Exponent schemas: validated exponents, (p, q) pairs and estimator kinds.
"""
import math
from enum import Enum
from typing import Annotated

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter, ValidationError, model_validator

from app.core.exceptions import ValidationFailure

# Real exponent of a convergent p-series.
Exponent = Annotated[float, Field(gt=1.0, allow_inf_nan=False)]

_exponent_adapter = TypeAdapter(Exponent)


def as_exponent(value: float, name: str = "exponent") -> float:
    """Validate a series exponent, raising ValidationFailure if it is not finite and > 1."""
    try:
        return _exponent_adapter.validate_python(value)
    except ValidationError as e:
        raise ValidationFailure(f"{name} must be a finite real > 1 (got {value!r})") from e


class ExponentPair(BaseModel):
    """Base exponent p and target exponent q with q > p > 1."""

    model_config = ConfigDict(frozen=True)

    p: float = Field(..., description="Base exponent")
    q: float = Field(..., description="Target exponent")

    @model_validator(mode="after")
    def check_order(self) -> "ExponentPair":
        if not (math.isfinite(self.p) and math.isfinite(self.q)) or not self.q > self.p > 1:
            raise ValueError(f"requires q > p > 1 (got p={self.p}, q={self.q})")
        return self

    @property
    def alpha_ratio(self) -> float:
        return self.q / self.p

    @property
    def predicted_rate(self) -> float:
        return min(2 * self.p - 2, self.q - 1)


class EstimatorTag(str, Enum):
    TRUNCATION = "trunc"
    DEFICIENCY_A = "a"
    DEFICIENCY_B = "b"
    DEFICIENCY_B2 = "b2"
    DEFICIENCY_CORRECTED = "bk"
    EULER_MACLAURIN = "em"


_FIXED_ORDERS = {
    EstimatorTag.DEFICIENCY_A: 0,
    EstimatorTag.DEFICIENCY_B: 1,
    EstimatorTag.DEFICIENCY_B2: 2,
}


class EstimatorKind(BaseModel):
    """
    Estimator selector.

    `order` is the correction order K for the deficiency hierarchy
    (A: 0, B: 1, B2: 2, bk:K) or the Euler-Maclaurin correction count M.
    """

    model_config = ConfigDict(frozen=True)

    tag: EstimatorTag
    order: int = 0

    @model_validator(mode="before")
    @classmethod
    def fill_fixed_order(cls, data):
        if isinstance(data, dict):
            tag = EstimatorTag(data.get("tag"))
            if tag in _FIXED_ORDERS:
                data = {**data, "order": _FIXED_ORDERS[tag]}
        return data

    @model_validator(mode="after")
    def check_order(self) -> "EstimatorKind":
        if self.order < 0:
            raise ValueError("estimator order must be >= 0")
        return self

    @classmethod
    def truncation(cls) -> "EstimatorKind":
        return cls(tag=EstimatorTag.TRUNCATION)

    @classmethod
    def deficiency_a(cls) -> "EstimatorKind":
        return cls(tag=EstimatorTag.DEFICIENCY_A)

    @classmethod
    def deficiency_b(cls) -> "EstimatorKind":
        return cls(tag=EstimatorTag.DEFICIENCY_B)

    @classmethod
    def deficiency_b2(cls) -> "EstimatorKind":
        return cls(tag=EstimatorTag.DEFICIENCY_B2)

    @classmethod
    def corrected(cls, order: int) -> "EstimatorKind":
        return cls(tag=EstimatorTag.DEFICIENCY_CORRECTED, order=order)

    @classmethod
    def euler_maclaurin(cls, correction_order: int) -> "EstimatorKind":
        return cls(tag=EstimatorTag.EULER_MACLAURIN, order=correction_order)

    @classmethod
    def parse(cls, token: str) -> "EstimatorKind":
        """Parse a CLI token: trunc, a, b, b2, bk:<K>, em:<M>."""
        text = token.strip().lower()
        name, _, arg = text.partition(":")
        try:
            tag = EstimatorTag(name)
        except ValueError as e:
            raise ValidationFailure(f"unknown estimator {token!r}") from e

        if tag in (EstimatorTag.DEFICIENCY_CORRECTED, EstimatorTag.EULER_MACLAURIN):
            if not arg.isdigit():
                raise ValidationFailure(f"estimator {token!r} needs a nonnegative integer order, e.g. {name}:2")
            return cls(tag=tag, order=int(arg))
        if arg:
            raise ValidationFailure(f"estimator {token!r} takes no order")
        return cls(tag=tag)

    @property
    def uses_base(self) -> bool:
        return self.tag not in (EstimatorTag.TRUNCATION, EstimatorTag.EULER_MACLAURIN)

    @property
    def correction_order(self) -> int:
        """K in the deficiency hierarchy; meaningless for truncation and Euler-Maclaurin."""
        return self.order

    @property
    def label(self) -> str:
        if self.tag in (EstimatorTag.DEFICIENCY_CORRECTED, EstimatorTag.EULER_MACLAURIN):
            return f"{self.tag.value}:{self.order}"
        return self.tag.value


class BaseStrategy(str, Enum):
    UNIVERSAL = "universal"
    EXPLICIT_EVEN = "explicit-even"
