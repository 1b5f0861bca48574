"""
NocPerf 测试公共夹具
"""
import pytest

from src.core.events import diagnostic_bus
from src.core.models import SolverConfig
from src.topologies.mesh import MeshTopology
from src.topologies.ring import RingTopology


@pytest.fixture(autouse=True)
def clean_diagnostics():
    """每个测试前后清空诊断计数与订阅"""
    diagnostic_bus.clear()
    yield
    diagnostic_bus.clear()


@pytest.fixture
def ring6() -> RingTopology:
    return RingTopology(6)


@pytest.fixture
def mesh4() -> MeshTopology:
    return MeshTopology(4, 4)


@pytest.fixture
def settings() -> SolverConfig:
    return SolverConfig()
