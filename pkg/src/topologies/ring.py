"""
NocPerf - 双向环拓扑
"""
from src.core.errors import DomainError
from src.core.models import RoutingName, TopologyConfig
from src.topologies.base import Topology

CLOCKWISE = "cw"
COUNTER_CLOCKWISE = "ccw"


class RingTopology(Topology):
    """n 个节点的双向环, 最短弧路由, 平局走顺时针"""

    name = "ring"
    display_name = "Bidirectional ring"
    description = "n×1 双向环, 每个节点一个注入队列和每个方向一个直通队列"
    directions = (CLOCKWISE, COUNTER_CLOCKWISE)
    routings = (RoutingName.SHORTEST_ARC.value,)
    parameters = {
        "size": {"type": "int", "label": "节点数", "min": 2, "default": 6},
    }

    def __init__(self, size: int):
        if size < 2:
            raise DomainError(f"ring needs at least 2 nodes, got {size}")
        self.size = size

    @classmethod
    def from_config(cls, config: TopologyConfig) -> "RingTopology":
        return cls(config.size)

    @property
    def node_count(self) -> int:
        return self.size

    @property
    def label(self) -> str:
        return f"ring{self.size}x1"

    def neighbor(self, node: int, direction: str) -> int | None:
        if direction == CLOCKWISE:
            return (node + 1) % self.size
        if direction == COUNTER_CLOCKWISE:
            return (node - 1) % self.size
        return None

    def next_direction(self, node: int, destination: int, routing: str) -> str | None:
        if node == destination:
            return None
        clockwise = (destination - node) % self.size
        if clockwise <= self.size - clockwise:
            return CLOCKWISE
        return COUNTER_CLOCKWISE


# 注册表入口
topology = RingTopology
