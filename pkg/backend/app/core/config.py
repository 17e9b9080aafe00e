"""
Configuration settings for the zeta-deficiency toolkit.
"""
import io
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Type

from dotenv import dotenv_values
from dotenv.parser import parse_stream
from pydantic import ValidationError, field_validator
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

from app.core.exceptions import ConfigurationError

BACKEND_DIR = Path(__file__).resolve().parents[2]


class Settings(BaseSettings):
    # Application
    APP_NAME: str = "zeta-deficiency"
    APP_VERSION: str = "1.0.0"
    ENVIRONMENT: str = "development"  # development, ci, production
    DEBUG: bool = False

    # Logging
    LOG_LEVEL: str = "WARNING"
    LOG_JSON: bool = True

    # Reference oracle (Euler-Maclaurin with N_ref terms, M_ref corrections)
    REFERENCE_N: int = 10_000
    REFERENCE_M: int = 6

    # Caps
    BERNOULLI_MAX_INDEX: int = 40
    TABLE_N_MAX_CAP: int = 2_000_000

    # Analysis
    SATURATION_FLOOR: float = 1e-16
    PLATEAU_TOLERANCE: float = 0.2
    POINTS_PER_DECADE: int = 40
    DEFAULT_N_MAX: int = 5000
    FIT_MIN_POINTS: int = 5
    ERROR_MODE: Literal["residual", "direct"] = "residual"

    # Experiment presets
    EXPERIMENTS_CONFIG_PATH: str = str(BACKEND_DIR / "config" / "experiments.yaml")

    model_config = SettingsConfigDict(case_sensitive=True, frozen=True, extra="forbid")

    @field_validator("REFERENCE_N", "POINTS_PER_DECADE", "DEFAULT_N_MAX", "TABLE_N_MAX_CAP")
    @classmethod
    def positive_int(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @field_validator("REFERENCE_M")
    @classmethod
    def nonnegative_int(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be nonnegative")
        return v

    @field_validator("BERNOULLI_MAX_INDEX")
    @classmethod
    def even_index(cls, v: int) -> int:
        if v < 2 or v % 2:
            raise ValueError("must be a positive even integer")
        return v

    @field_validator("SATURATION_FLOOR", "PLATEAU_TOLERANCE")
    @classmethod
    def positive_float(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("must be positive")
        return v

    @field_validator("LOG_LEVEL")
    @classmethod
    def known_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"unknown log level {v!r}")
        return level

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # No environment variables: a run is fully described by flags and config file.
        return (init_settings,)


def read_config_file(path: str | Path) -> Dict[str, Any]:
    """
    Read a `key = value` config file into upper-cased settings keys.

    Lines follow the .env syntax understood by python-dotenv: `#` comments,
    optional quotes, dashes or lower case in keys. Values stay strings until
    Settings validates them.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigurationError(f"cannot read config file {path}: {e}") from e

    for binding in parse_stream(io.StringIO(text)):
        if binding.error or (binding.key is not None and binding.value is None):
            raise ConfigurationError(
                f"config file {path}, line {binding.original.line}: expected key = value "
                f"(got {binding.original.string.strip()!r})"
            )

    # No interpolation: ${VAR} would pull values from the environment.
    raw = dotenv_values(stream=io.StringIO(text), interpolate=False)
    values = {k.strip().upper().replace("-", "_"): v for k, v in raw.items()}
    unknown = sorted(set(values) - set(Settings.model_fields))
    if unknown:
        raise ConfigurationError(f"unknown config keys in {path}: {', '.join(unknown)}")
    return values


def load_settings(
    config_path: Optional[str | Path] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Settings:
    """
    Build settings with precedence: overrides (flags) > config file > defaults.
    """
    values: Dict[str, Any] = {}
    if config_path is not None:
        values.update(read_config_file(config_path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})

    try:
        return Settings(**values)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration: {e}") from e


# Global settings instance
settings = Settings()


def activate_settings(new_settings: Settings) -> Settings:
    """Make `new_settings` the instance services read through `config.settings`."""
    global settings
    settings = new_settings
    return settings
