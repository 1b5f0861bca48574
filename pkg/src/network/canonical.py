"""
NocPerf - 三种典型优先级结构的队列图

basic:            q1(高) 与 q2(低) 在 SA 上竞争
contention-low:   q2 中类2去 SA (与 q1 竞争), 类3去 SB
contention-high:  q1 中类1去 SA, 类2去 SB 并优先于 q3
"""
from src.core.errors import DomainError
from src.core.models import Structure
from src.core.traffic import GGeoProcess
from src.network.graph import FlowSpec, QueueGraph, assemble_graph
from src.topologies.base import Hop, QueueId, ServerId

Q1 = QueueId(0, "q1")
Q2 = QueueId(0, "q2")
Q3 = QueueId(0, "q3")
SA = ServerId(0, "SA")
SB = ServerId(0, "SB")

CLASS_NAMES = ("class1", "class2", "class3")

_LAYOUTS: dict[Structure, tuple[tuple[QueueId, ServerId], ...]] = {
    Structure.BASIC: ((Q1, SA), (Q2, SA)),
    Structure.CONTENTION_LOW: ((Q1, SA), (Q2, SA), (Q2, SB)),
    Structure.CONTENTION_HIGH: ((Q1, SA), (Q1, SB), (Q3, SB)),
}

_RANKS: dict[Structure, dict[QueueId, int]] = {
    Structure.BASIC: {Q1: 0, Q2: 1},
    Structure.CONTENTION_LOW: {Q1: 0, Q2: 1},
    Structure.CONTENTION_HIGH: {Q1: 0, Q3: 1},
}


def canonical_graph(
    structure: Structure | str,
    rates: tuple[float, ...],
    burst_prob: float = 0.0,
    service_time: int = 1,
    *,
    link_latency: int = 1,
    check_stability: bool = True,
) -> QueueGraph:
    """按 (λ1, λ2, λ3) 构建典型结构, 速率为0的类省略 (basic 忽略 λ3)"""
    structure = Structure(structure)
    if structure not in _LAYOUTS:
        raise DomainError(f"no canonical layout for structure '{structure.value}'")
    layout = _LAYOUTS[structure]

    flows: list[FlowSpec] = []
    routes: list[list[Hop]] = []
    for index, (queue, server) in enumerate(layout):
        rate = rates[index] if index < len(rates) else 0.0
        if rate <= 0:
            continue
        flows.append(FlowSpec(index + 1, 0, GGeoProcess(rate, burst_prob), name=CLASS_NAMES[index]))
        routes.append([Hop(queue, server)])

    used = {hops[0].queue for hops in routes}
    ranks = {q: r for q, r in _RANKS[structure].items() if q in used}
    return assemble_graph(
        flows, routes, ranks,
        service_time=service_time,
        link_latency=link_latency,
        label=structure.value,
        check_stability=check_stability,
    )


def flow_index(graph: QueueGraph, name: str) -> int:
    """按类名查找流下标"""
    for index, flow in enumerate(graph.flows):
        if flow.name == name:
            return index
    raise KeyError(name)
