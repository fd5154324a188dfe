import pytest

from clickshield.filter_engine import EngineConfig, FilterEngine
from clickshield.net_registry import load_registry

REGISTRY_TEXT = """\
# test ranges
10.0.0.0/8,netA
10.1.0.0/16,netB
10.1.2.0/24,netC,4
192.168.0.0/24,lan,3
198.51.100.0/24,isp,256
203.0.113.0/24,small,100
"""


@pytest.fixture
def registry():
    return load_registry(REGISTRY_TEXT)


@pytest.fixture
def make_engine(registry):
    def _make(window=3600.0, threshold=0.01, **kwargs):
        return FilterEngine(
            registry, EngineConfig(window_seconds=window, threshold=threshold, **kwargs)
        )

    return _make
