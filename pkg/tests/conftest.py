import pytest

from cslnoise.config import ToolkitConfig


@pytest.fixture
def cfg():
    """Built-in reference configuration (desk-scale campaign, draw-mode ringdowns)."""
    c = ToolkitConfig()
    c.campaign.ringdown.mode = "draw"
    return c


@pytest.fixture
def res(cfg):
    return cfg.resonator_params()


@pytest.fixture
def squid(cfg):
    return cfg.squid_readout()


@pytest.fixture(autouse=True)
def _workdir(tmp_path, monkeypatch):
    """Keep the audit log of CLI tests out of the repository."""
    monkeypatch.setenv("CSLNOISE_WORKDIR", str(tmp_path / ".cslnoise"))
