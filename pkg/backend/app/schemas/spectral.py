"""
Spectrum schemas: eigenvalue sources and spectral (p, q) pairs.
"""
import math
from typing import Annotated, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class PowerLawSpectrum(BaseModel):
    """lambda_k = k**alpha."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["power_law"] = "power_law"
    alpha: float = Field(..., gt=0.0, allow_inf_nan=False)

    @property
    def k_max(self) -> Optional[int]:
        return None


class ExplicitSpectrum(BaseModel):
    """Finite nondecreasing list of positive eigenvalues."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["explicit"] = "explicit"
    eigenvalues: Tuple[float, ...]

    @field_validator("eigenvalues")
    @classmethod
    def check_eigenvalues(cls, v: Tuple[float, ...]) -> Tuple[float, ...]:
        if not v:
            raise ValueError("spectrum is empty")
        for index, value in enumerate(v, start=1):
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"eigenvalue {index} must be finite and > 0 (got {value!r})")
            if index > 1 and value < v[index - 2]:
                raise ValueError(f"eigenvalues must be nondecreasing; index {index} decreases")
        return v

    @property
    def k_max(self) -> int:
        return len(self.eigenvalues)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.eigenvalues, dtype=np.float64)


SpectrumSource = Annotated[Union[PowerLawSpectrum, ExplicitSpectrum], Field(discriminator="kind")]


class SpectralPair(BaseModel):
    """Spectral base/target exponents with q > p > 0 and, for power laws, p*alpha > 1."""

    model_config = ConfigDict(frozen=True)

    source: SpectrumSource
    p: float = Field(..., gt=0.0, allow_inf_nan=False)
    q: float = Field(..., gt=0.0, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_pair(self) -> "SpectralPair":
        if not self.q > self.p:
            raise ValueError(f"requires q > p (got p={self.p}, q={self.q})")
        if isinstance(self.source, PowerLawSpectrum):
            alpha = self.source.alpha
            if not (self.p * alpha > 1 and self.q * alpha > 1):
                raise ValueError(
                    f"divergent configuration: requires p*alpha > 1 and q*alpha > 1 "
                    f"(got p={self.p}, q={self.q}, alpha={alpha})"
                )
        return self

    @property
    def alpha_ratio(self) -> float:
        return self.q / self.p
