"""Shared fixtures: small grids and operators, and an isolated environment."""
import pytest

from frac_schrodinger.tool import config
from frac_schrodinger.tool.fracalc import TimeGrid
from frac_schrodinger.tool.maxreg import EnsembleSpec
from frac_schrodinger.tool.spectral import DiagonalOperator

SEED = 20240607


@pytest.fixture(autouse=True)
def isolated_env(monkeypatch):
    """Keep ~/.config/frac-schrodinger/.env and FRAC_SCHRODINGER_* out of the tests."""
    for key in (config.ENV_OUTPUT, config.ENV_WORKERS, config.ENV_LOG_LEVEL):
        monkeypatch.delenv(key, raising=False)
    monkeypatch.setattr(config, "_env_loaded", True)


@pytest.fixture
def grid():
    return TimeGrid(1.0, 128)


@pytest.fixture
def laplacian():
    return DiagonalOperator.dirichlet_laplacian_1d(4)


@pytest.fixture
def ensemble():
    return EnsembleSpec(4, SEED)


@pytest.fixture
def output_dir(tmp_path):
    return tmp_path / "runs"
