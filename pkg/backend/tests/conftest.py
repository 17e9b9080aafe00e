"""
Test configuration for zeta-deficiency.
"""
import pytest
from hypothesis import HealthCheck
from hypothesis import settings as hypothesis_settings

from app.core import config
from app.core.config import Settings
from app.services.deficiency import build_context

hypothesis_settings.register_profile(
    "deterministic",
    max_examples=100,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture],
)
hypothesis_settings.load_profile("deterministic")


@pytest.fixture(autouse=True)
def restore_active_settings(monkeypatch):
    """Reinstate the module-level settings after tests that activate their own."""
    monkeypatch.setattr(config, "settings", config.settings)


@pytest.fixture(scope="session")
def default_settings():
    """Built-in defaults, independent of any config file."""
    return Settings()


@pytest.fixture(scope="session")
def context_factory():
    """Build (and memoise) estimation contexts keyed by (q, n_max, p)."""
    cache = {}

    def factory(q, n_max=5000, p=None):
        key = (q, n_max, p)
        if key not in cache:
            cache[key] = build_context(q, n_max, p=p)
        return cache[key]

    return factory


@pytest.fixture
def spectrum_file(tmp_path):
    """Write an eigenvalue file and return its path."""

    def write(lines, name="spectrum.txt"):
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return write
