"""
NocPerf - 2D mesh 拓扑
节点编号 row * width + col, 坐标 (row, col)
"""
from src.core.errors import DomainError
from src.core.models import RoutingName, TopologyConfig
from src.topologies.base import Topology

NORTH = "north"    # row - 1
SOUTH = "south"    # row + 1
EAST = "east"      # col + 1
WEST = "west"      # col - 1


class MeshTopology(Topology):
    """width × height 的2D mesh, 维序路由"""

    name = "mesh"
    display_name = "2D mesh"
    description = "width×height mesh, 默认 Y-X 路由 (先走完行方向, 再走列方向)"
    directions = (NORTH, SOUTH, EAST, WEST)
    routings = (RoutingName.YX.value, RoutingName.XY.value)
    parameters = {
        "width": {"type": "int", "label": "列数", "min": 2, "default": 4},
        "height": {"type": "int", "label": "行数", "min": 2, "default": 4},
    }

    def __init__(self, width: int, height: int):
        if width < 2 or height < 2:
            raise DomainError(f"mesh sides must be >= 2, got {width}x{height}")
        self.width = width
        self.height = height

    @classmethod
    def from_config(cls, config: TopologyConfig) -> "MeshTopology":
        return cls(config.width, config.height)

    @property
    def node_count(self) -> int:
        return self.width * self.height

    @property
    def label(self) -> str:
        return f"mesh{self.width}x{self.height}"

    def coordinates(self, node: int) -> tuple[int, int]:
        return divmod(node, self.width)

    def node_at(self, row: int, col: int) -> int:
        return row * self.width + col

    def neighbor(self, node: int, direction: str) -> int | None:
        row, col = self.coordinates(node)
        if direction == NORTH and row > 0:
            return self.node_at(row - 1, col)
        if direction == SOUTH and row < self.height - 1:
            return self.node_at(row + 1, col)
        if direction == EAST and col < self.width - 1:
            return self.node_at(row, col + 1)
        if direction == WEST and col > 0:
            return self.node_at(row, col - 1)
        return None

    def next_direction(self, node: int, destination: int, routing: str) -> str | None:
        row, col = self.coordinates(node)
        dst_row, dst_col = self.coordinates(destination)
        vertical = None
        if dst_row != row:
            vertical = SOUTH if dst_row > row else NORTH
        horizontal = None
        if dst_col != col:
            horizontal = EAST if dst_col > col else WEST

        if routing == RoutingName.XY.value:
            return horizontal or vertical
        return vertical or horizontal


# 注册表入口
topology = MeshTopology
