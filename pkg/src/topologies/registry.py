"""
NocPerf - 拓扑注册表
"""
import importlib
import logging
from typing import TYPE_CHECKING

from src.core.errors import ConfigError

if TYPE_CHECKING:
    from src.core.models import TopologyConfig
    from src.topologies.base import Topology

logger = logging.getLogger(__name__)


class TopologyRegistry:
    """拓扑注册表"""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
            cls._instance._initialized = False
        return cls._instance

    def __init__(self):
        if self._initialized:
            return
        self._topologies: dict[str, type["Topology"]] = {}
        self._initialized = True

    def register(self, topology: type["Topology"]):
        """注册拓扑"""
        if topology.name in self._topologies:
            logger.debug(f"Topology {topology.name} already registered, overwriting")
        self._topologies[topology.name] = topology
        logger.debug(f"Registered topology: {topology.name} ({topology.display_name})")

    def unregister(self, name: str):
        """取消注册"""
        if name in self._topologies:
            del self._topologies[name]

    def get(self, name: str) -> type["Topology"] | None:
        """获取拓扑类"""
        if not self._topologies:
            self.load_builtin_topologies()
        return self._topologies.get(name)

    def get_all(self) -> dict[str, type["Topology"]]:
        """获取所有拓扑"""
        if not self._topologies:
            self.load_builtin_topologies()
        return self._topologies.copy()

    def list_topologies(self) -> list[dict]:
        """列出所有拓扑信息"""
        return [t.get_info() for t in self.get_all().values()]

    def load_builtin_topologies(self):
        """加载内置拓扑"""
        builtin_topologies = [
            "src.topologies.ring",
            "src.topologies.mesh",
        ]

        for module_name in builtin_topologies:
            try:
                module = importlib.import_module(module_name)
                if hasattr(module, "topology"):
                    self.register(module.topology)
            except ImportError as e:
                logger.warning(f"Failed to load topology {module_name}: {e}")

    def create(self, config: "TopologyConfig") -> "Topology":
        """按配置构建拓扑"""
        kind = config.kind if isinstance(config.kind, str) else config.kind.value
        topology_cls = self.get(kind)
        if topology_cls is None:
            raise ConfigError(f"unknown topology kind: {kind}")
        return topology_cls.from_config(config)


# 全局注册表实例
registry = TopologyRegistry()


def get_topology(name: str) -> type["Topology"] | None:
    """获取拓扑类的便捷函数"""
    return registry.get(name)


def create_topology(config: "TopologyConfig") -> "Topology":
    """按配置构建拓扑的便捷函数"""
    return registry.create(config)
