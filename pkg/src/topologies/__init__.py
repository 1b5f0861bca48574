"""
NocPerf Topologies - 拓扑与确定性路由
"""
from .base import Topology, QueueId, ServerId, Hop, INJECT
from .ring import RingTopology
from .mesh import MeshTopology
from .registry import TopologyRegistry, registry, get_topology, create_topology

__all__ = [
    # Base
    "Topology", "QueueId", "ServerId", "Hop", "INJECT",
    # Builders
    "RingTopology", "MeshTopology",
    # Registry
    "TopologyRegistry", "registry", "get_topology", "create_topology",
]
