import pytest

from src.config import Settings
from src.models import ModelParams


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    """Every test reads the environment afresh."""
    for name in ("FRACPOISSON_SEED", "FRACPOISSON_WORKERS", "FRACPOISSON_TAIL", "FRACPOISSON_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    Settings.reset()
    yield
    Settings.reset()


@pytest.fixture
def params():
    """Two-component process used throughout: nu=0.7, lambda=(0.6, 0.9)."""
    return ModelParams(nu=0.7, lambdas=(0.6, 0.9))


@pytest.fixture
def poisson_params():
    return ModelParams(nu=1.0, lambdas=(0.6, 0.9))
