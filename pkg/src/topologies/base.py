"""
NocPerf - 拓扑基类
所有拓扑构建器必须继承此类
"""
from abc import ABC, abstractmethod
from collections import deque
from typing import Any, NamedTuple

from src.core.errors import ConfigError, DomainError
from src.core.models import RoutingName, TopologyConfig

# 注入端口名
INJECT = "inject"


class QueueId(NamedTuple):
    """路由器上的输入队列: 注入队列或按到达方向划分的直通队列"""
    node: int
    port: str

    def __str__(self) -> str:
        return f"{self.node}.{self.port}"


class ServerId(NamedTuple):
    """路由器的输出端口"""
    node: int
    port: str

    def __str__(self) -> str:
        return f"{self.node}.{self.port}"


class Hop(NamedTuple):
    """路径上的一跳: 排队的队列 + 服务它的输出端口"""
    queue: QueueId
    server: ServerId


class Topology(ABC):
    """拓扑基类"""

    # 拓扑标识符 (唯一)
    name: str = ""

    # 显示名称
    display_name: str = ""

    # 版本
    version: str = "1.0.0"

    # 描述
    description: str = ""

    # 链路方向
    directions: tuple[str, ...] = ()

    # 支持的路由算法, 第一个为默认
    routings: tuple[str, ...] = ()

    # 构建参数定义
    # 格式: {"param_name": {"type": "int", "label": "显示名称", "min": 2, "default": 4}}
    parameters: dict[str, dict[str, Any]] = {}

    @property
    @abstractmethod
    def node_count(self) -> int:
        """节点数"""

    @property
    @abstractmethod
    def label(self) -> str:
        """报表中使用的名称, 如 ring6x1"""

    @abstractmethod
    def neighbor(self, node: int, direction: str) -> int | None:
        """沿 direction 的相邻节点, 没有链路时返回 None"""

    @abstractmethod
    def next_direction(self, node: int, destination: int, routing: str) -> str | None:
        """确定性路由: 下一跳方向, 已到达时返回 None"""

    @classmethod
    @abstractmethod
    def from_config(cls, config: TopologyConfig) -> "Topology":
        """从配置构建"""

    def nodes(self) -> range:
        return range(self.node_count)

    def coordinates(self, node: int) -> tuple[int, ...]:
        return (node,)

    def check_node(self, node: int):
        if not 0 <= node < self.node_count:
            raise DomainError(f"node {node} outside {self.label}")

    def links(self) -> list[tuple[int, str, int]]:
        """有向链路 (源, 方向, 目的)"""
        result = []
        for node in self.nodes():
            for direction in self.directions:
                other = self.neighbor(node, direction)
                if other is not None:
                    result.append((node, direction, other))
        return result

    def is_connected(self) -> bool:
        adjacency: dict[int, list[int]] = {node: [] for node in self.nodes()}
        for src, _, dst in self.links():
            adjacency[src].append(dst)
        seen = {0}
        frontier = deque([0])
        while frontier:
            node = frontier.popleft()
            for other in adjacency[node]:
                if other not in seen:
                    seen.add(other)
                    frontier.append(other)
        return len(seen) == self.node_count

    def resolve_routing(self, routing: str | None = None) -> str:
        """auto/None 映射为默认路由, 不支持的路由抛 ConfigError"""
        if routing is None or routing == RoutingName.AUTO.value:
            return self.routings[0]
        if routing not in self.routings:
            raise ConfigError(f"routing '{routing}' is not available on {self.label}")
        return routing

    def route(self, source: int, destination: int, routing: str | None = None) -> list[Hop]:
        """源到目的的队列路径"""
        self.check_node(source)
        self.check_node(destination)
        if source == destination:
            raise DomainError(f"route needs distinct endpoints (node {source})")
        routing = self.resolve_routing(routing)

        hops: list[Hop] = []
        node, port = source, INJECT
        while node != destination:
            direction = self.next_direction(node, destination, routing)
            nxt = self.neighbor(node, direction) if direction is not None else None
            if nxt is None or len(hops) > self.node_count:
                raise DomainError(f"{routing} routing cannot reach {destination} from {source}")
            hops.append(Hop(QueueId(node, port), ServerId(node, direction)))
            node, port = nxt, direction
        return hops

    @classmethod
    def get_info(cls) -> dict:
        """获取拓扑信息"""
        return {
            "name": cls.name,
            "display_name": cls.display_name,
            "version": cls.version,
            "description": cls.description,
            "routings": list(cls.routings),
            "parameters": cls.parameters,
        }
