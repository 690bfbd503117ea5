import math

import pytest

from chiral_feedback.models import SystemParams
from chiral_feedback.settings import get_settings


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Point run history at a temp file and rebuild settings for every test."""
    monkeypatch.setenv("SIM_HISTORY_PATH", str(tmp_path / "run_history.json"))
    monkeypatch.delenv("SIM_THREADS", raising=False)
    monkeypatch.delenv("SIM_LOG_LEVEL", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def dark_params():
    # delta_phi = pi/2 is dark at omega = gamma
    return SystemParams(omega=1.0, delta_phi=math.pi / 2)


@pytest.fixture
def commensurate_params():
    return SystemParams(omega=1.0, delta1=0.5, delta2=-0.5)
