"""
拓扑与路由测试
"""
import pytest

from src.core.errors import ConfigError, DomainError
from src.core.models import TopologyConfig
from src.topologies import (
    INJECT,
    Hop,
    MeshTopology,
    QueueId,
    RingTopology,
    ServerId,
    create_topology,
    get_topology,
    registry,
)


# ============ 环 ============

def test_ring_tie_goes_clockwise(ring6):
    hops = ring6.route(1, 4)
    assert len(hops) == 3
    assert [h.server.port for h in hops] == ["cw", "cw", "cw"]
    assert hops[0].queue == QueueId(1, INJECT)
    assert hops[1].queue == QueueId(2, "cw")


def test_ring_takes_shorter_arc(ring6):
    hops = ring6.route(1, 5)
    assert [h.server for h in hops] == [ServerId(1, "ccw"), ServerId(0, "ccw")]
    assert hops[1].queue == QueueId(0, "ccw")


def test_ring_links_and_connectivity(ring6):
    assert len(ring6.links()) == 12
    assert ring6.is_connected()
    assert ring6.label == "ring6x1"


def test_ring_rejects_tiny_size():
    with pytest.raises(DomainError):
        RingTopology(1)


# ============ mesh ============

def test_mesh_same_row_is_pure_x_leg(mesh4):
    hops = mesh4.route(mesh4.node_at(0, 0), mesh4.node_at(0, 3))
    assert [h.server.port for h in hops] == ["east"] * 3


def test_mesh_yx_goes_vertical_first(mesh4):
    hops = mesh4.route(mesh4.node_at(0, 0), mesh4.node_at(2, 3))
    assert [h.server.port for h in hops] == ["south", "south", "east", "east", "east"]
    # 转弯后进入的是沿Y方向到达的直通队列
    assert hops[2].queue == QueueId(mesh4.node_at(2, 0), "south")


def test_mesh_xy_goes_horizontal_first(mesh4):
    hops = mesh4.route(mesh4.node_at(0, 0), mesh4.node_at(2, 3), "xy")
    assert [h.server.port for h in hops] == ["east", "east", "east", "south", "south"]


def test_mesh_coordinates(mesh4):
    assert mesh4.coordinates(6) == (1, 2)
    assert mesh4.node_at(1, 2) == 6
    assert mesh4.neighbor(0, "north") is None
    assert mesh4.neighbor(0, "east") == 1
    assert len(mesh4.links()) == 48
    assert mesh4.label == "mesh4x4"


def test_route_validation(mesh4):
    with pytest.raises(DomainError):
        mesh4.route(0, 0)
    with pytest.raises(DomainError):
        mesh4.route(0, 16)
    with pytest.raises(ConfigError):
        mesh4.route(0, 5, "shortest-arc")


def test_auto_routing_is_default(mesh4, ring6):
    assert mesh4.resolve_routing("auto") == "yx"
    assert mesh4.resolve_routing(None) == "yx"
    assert ring6.resolve_routing("auto") == "shortest-arc"


def test_route_hops_are_named_tuples(ring6):
    hop = ring6.route(0, 1)[0]
    assert isinstance(hop, Hop)
    assert str(hop.queue) == "0.inject"


# ============ 注册表 ============

def test_registry_lists_builtin_topologies():
    names = {info["name"] for info in registry.list_topologies()}
    assert {"ring", "mesh"} <= names
    assert get_topology("ring") is RingTopology


def test_create_from_config():
    ring = create_topology(TopologyConfig(kind="ring", size=8))
    mesh = create_topology(TopologyConfig(kind="mesh", width=8, height=8))
    assert ring.label == "ring8x1"
    assert mesh.node_count == 64


def test_unknown_topology_kind():
    config = TopologyConfig.model_construct(kind="torus", size=4, width=4, height=4)
    with pytest.raises(ConfigError):
        create_topology(config)
