"""
NocPerf - 队列网络构建与结构识别

类 = (流, 跳). 每一跳在某个队列中排队, 由某个输出端口 (服务器) 服务.
网内flit优先于新注入的flit: 直通队列 rank 0, 注入队列 rank 1.
"""
from dataclasses import dataclass, field, replace
from itertools import combinations
import logging

from src.core.errors import DomainError, InstabilityError, UnclassifiableStructureError
from src.core.models import Arbitration, Structure
from src.core.traffic import GGeoProcess, MomentPair, flow_departure
from src.topologies.base import INJECT, Hop, QueueId, ServerId, Topology

logger = logging.getLogger(__name__)

THROUGH_RANK = 0
INJECTION_RANK = 1

ClassKey = tuple[int, int]


@dataclass(frozen=True)
class FlowSpec:
    """源到目的的一条GGeo流"""
    source: int
    destination: int
    arrival: GGeoProcess
    name: str | None = None

    def __post_init__(self):
        if self.source == self.destination:
            raise DomainError(f"flow source and destination must differ (node {self.source})")

    @property
    def label(self) -> str:
        return self.name or f"{self.source}->{self.destination}"


@dataclass(frozen=True)
class HopClass:
    """流在一跳上的类"""
    flow: int
    hop: int
    queue: QueueId
    server: ServerId
    rank: int
    arrival: MomentPair                      # 按原始服务过程逐跳传播的初始矩

    @property
    def key(self) -> ClassKey:
        return (self.flow, self.hop)

    @property
    def rate(self) -> float:
        return self.arrival.rate


@dataclass(frozen=True)
class StructureAnnotation:
    """服务器上一对队列之间的结构"""
    server: ServerId
    high: QueueId
    low: QueueId
    structures: tuple[Structure, ...]


@dataclass
class QueueGraph:
    """多类排队网络"""
    flows: list[FlowSpec]
    routes: list[list[Hop]]
    ranks: dict[QueueId, int]
    classes: dict[ClassKey, HopClass]
    queue_classes: dict[QueueId, list[ClassKey]]
    server_classes: dict[ServerId, list[ClassKey]]
    queue_servers: dict[QueueId, list[ServerId]]
    service_time: int = 1
    service_scv: float = 0.0
    link_latency: int = 1
    label: str = "graph"
    annotations: list[StructureAnnotation] = field(default_factory=list)

    def queue_rate(self, queue: QueueId) -> float:
        return sum(self.classes[k].rate for k in self.queue_classes[queue])

    def queue_load(self, queue: QueueId) -> float:
        return self.queue_rate(queue) * self.service_time

    def server_load(self, server: ServerId) -> float:
        return sum(self.classes[k].rate for k in self.server_classes[server]) * self.service_time

    def splits(self, queue: QueueId) -> bool:
        """队列中的类是否去往多个服务器"""
        return len(self.queue_servers.get(queue, [])) > 1

    def hop_count(self, flow: int) -> int:
        return len(self.routes[flow])

    def zero_load_latency(self, flow: int) -> float:
        return self.hop_count(flow) * (self.service_time + self.link_latency)

    def structures_at(self, server: ServerId) -> list[StructureAnnotation]:
        return [a for a in self.annotations if a.server == server]

    def with_flows(self, flows: list[FlowSpec]) -> "QueueGraph":
        """同样的路径和优先级, 替换流的到达过程"""
        if len(flows) != len(self.flows):
            raise DomainError("replacement flow list must match the graph's flows")
        graph = assemble_graph(
            flows, self.routes, self.ranks,
            service_time=self.service_time,
            service_scv=self.service_scv,
            link_latency=self.link_latency,
            label=self.label,
        )
        return classify_structures(graph) if self.annotations else graph


# ============ 路由与构建 ============

def route(topology: Topology, source: int, destination: int, routing: str | None = None) -> list[Hop]:
    """确定性路由得到的 (队列, 服务器) 路径"""
    return topology.route(source, destination, routing)


def uniform_flows(topology: Topology, injection_rate: float, burst_prob: float) -> list[FlowSpec]:
    """每个节点以相同速率发往其他所有节点, 每源合计 injection_rate"""
    n = topology.node_count
    rate = injection_rate / (n - 1)
    return [
        FlowSpec(src, dst, GGeoProcess(rate, burst_prob))
        for src in topology.nodes()
        for dst in topology.nodes()
        if src != dst
    ]


def assign_ranks(routes: list[list[Hop]], arbitration: str = Arbitration.PRIORITY.value) -> dict[QueueId, int]:
    ranks: dict[QueueId, int] = {}
    for hops in routes:
        for hop in hops:
            if arbitration == Arbitration.FAIR.value:
                ranks[hop.queue] = THROUGH_RANK
            elif hop.queue.port == INJECT:
                ranks[hop.queue] = INJECTION_RANK
            else:
                ranks[hop.queue] = THROUGH_RANK
    return ranks


def assemble_graph(
    flows: list[FlowSpec],
    routes: list[list[Hop]],
    ranks: dict[QueueId, int],
    *,
    service_time: int = 1,
    service_scv: float = 0.0,
    link_latency: int = 1,
    label: str = "graph",
    check_stability: bool = True,
) -> QueueGraph:
    """由显式路径构建队列图, 并按原始服务过程逐跳计算到达矩"""
    if len(flows) != len(routes):
        raise DomainError("every flow needs exactly one route")

    placement: dict[ClassKey, Hop] = {}
    queue_members: dict[QueueId, list[ClassKey]] = {}
    server_members: dict[ServerId, list[ClassKey]] = {}
    queue_servers: dict[QueueId, list[ServerId]] = {}
    for i, hops in enumerate(routes):
        if not hops:
            raise DomainError(f"flow {flows[i].label} has an empty route")
        for h, hop in enumerate(hops):
            if hop.queue not in ranks:
                raise DomainError(f"queue {hop.queue} has no priority rank")
            placement[(i, h)] = hop
            queue_members.setdefault(hop.queue, []).append((i, h))
            server_members.setdefault(hop.server, []).append((i, h))
            servers = queue_servers.setdefault(hop.queue, [])
            if hop.server not in servers:
                servers.append(hop.server)

    rate_of = {key: flows[key[0]].arrival.rate for key in placement}
    queue_rate = {q: sum(rate_of[k] for k in keys) for q, keys in queue_members.items()}
    queue_load = {q: r * service_time for q, r in queue_rate.items()}

    if check_stability:
        for q in sorted(queue_load):
            if queue_load[q] >= 1:
                raise InstabilityError(str(q), queue_load[q])
        for s in sorted(server_members):
            load = sum(rate_of[k] for k in server_members[s]) * service_time
            if load >= 1:
                raise InstabilityError(str(s), load, f"server {s} is unstable (utilization {load:.4f} >= 1)")

    classes: dict[ClassKey, HopClass] = {}
    for i, (flow, hops) in enumerate(zip(flows, routes)):
        moments = flow.arrival.moments()
        for h, hop in enumerate(hops):
            if h > 0:
                upstream = hops[h - 1].queue
                if queue_load[upstream] < 1:
                    share = flow.arrival.rate / queue_rate[upstream]
                    moments = flow_departure(moments, queue_load[upstream], service_scv, share)
            classes[(i, h)] = HopClass(i, h, hop.queue, hop.server, ranks[hop.queue], moments)

    return QueueGraph(
        flows=list(flows),
        routes=[list(hops) for hops in routes],
        ranks=dict(ranks),
        classes=classes,
        queue_classes={q: queue_members[q] for q in sorted(queue_members)},
        server_classes={s: server_members[s] for s in sorted(server_members)},
        queue_servers={q: queue_servers[q] for q in sorted(queue_servers)},
        service_time=service_time,
        service_scv=service_scv,
        link_latency=link_latency,
        label=label,
    )


def build_queue_graph(
    topology: Topology,
    flows: list[FlowSpec],
    *,
    routing: str | None = None,
    service_time: int = 1,
    service_scv: float = 0.0,
    link_latency: int = 1,
    arbitration: str = Arbitration.PRIORITY.value,
    check_stability: bool = True,
) -> QueueGraph:
    """拓扑 + 路由 + 流 -> 队列图"""
    routes = [route(topology, f.source, f.destination, routing) for f in flows]
    ranks = assign_ranks(routes, arbitration)
    graph = assemble_graph(
        flows, routes, ranks,
        service_time=service_time,
        service_scv=service_scv,
        link_latency=link_latency,
        label=topology.label,
        check_stability=check_stability,
    )
    logger.info(
        f"Built queue graph {graph.label}: {len(flows)} flows, {len(graph.classes)} classes, "
        f"{len(graph.queue_classes)} queues"
    )
    return graph


# ============ 结构识别 ============

def classify_structures(graph: QueueGraph) -> QueueGraph:
    """标注每个服务器上每对队列之间的分解结构"""
    annotations: list[StructureAnnotation] = []
    members = {q: set(keys) for q, keys in graph.queue_classes.items()}
    for server, keys in graph.server_classes.items():
        queues: list[QueueId] = []
        for key in keys:
            hop_class = graph.classes.get(key)
            if hop_class is None or hop_class.server != server:
                raise UnclassifiableStructureError(f"class {key} is not bound to server {server}")
            if key not in members.get(hop_class.queue, ()):
                raise UnclassifiableStructureError(f"class {key} missing from queue {hop_class.queue}")
            if hop_class.queue not in graph.ranks:
                raise UnclassifiableStructureError(f"queue {hop_class.queue} has no rank")
            if hop_class.queue not in queues:
                queues.append(hop_class.queue)

        for first, second in combinations(sorted(queues), 2):
            if graph.ranks[first] == graph.ranks[second]:
                annotations.append(StructureAnnotation(server, first, second, (Structure.SHARED,)))
                continue
            high, low = (first, second) if graph.ranks[first] < graph.ranks[second] else (second, first)
            labels = []
            if graph.splits(low):
                labels.append(Structure.CONTENTION_LOW)
            if graph.splits(high):
                labels.append(Structure.CONTENTION_HIGH)
            annotations.append(StructureAnnotation(server, high, low, tuple(labels) or (Structure.BASIC,)))

    return replace(graph, annotations=annotations)
