"""
NocPerf - 周期精确仿真器

每个周期: 到达 -> 仲裁 -> 离开.
服务器在周期 s 授权队首flit, 服务占用 [s, s+T), flit 在 s+T+L 到达下一跳 (或目的节点).
每个队列是单头FIFO: 队首在服务期间, 同队列其他flit不能被授权.
仲裁: rank 小者优先, 同 rank 轮询. 所有队列为空时直接跳到下一个注入/链路到达.
"""
from dataclasses import dataclass, field
from collections import deque
from pathlib import Path
import heapq
import logging

import numpy as np

from src.core.errors import ConfigError
from src.core.events import diagnostic_bus, emit_queue_saturated
from src.core.models import (
    Arbitration,
    ClassStats,
    ConditionalOccupancy,
    FlowStats,
    QueueStats,
    ServerStats,
    SimReport,
    Structure,
)
from src.core.traffic import GGeoSampler, spawn_seeds
from src.network.canonical import canonical_graph
from src.network.graph import FlowSpec, QueueGraph, build_queue_graph
from src.simulator.stats import GapMoments, WaitAccumulator, overlap
from src.topologies.base import Topology
from src.traceburst.trace import TraceEvent, write_trace

logger = logging.getLogger(__name__)


@dataclass
class SimConfig:
    """仿真配置"""
    topology: Topology
    flows: list[FlowSpec]
    routing: str | None = None
    service_time: int = 1
    service_scv: float = 0.0
    link_latency: int = 1
    arbitration: str = Arbitration.PRIORITY.value
    warmup: int = 200_000
    measure: int = 2_000_000
    seed: int = 1
    percentiles: tuple[float, ...] = (50.0, 95.0, 99.0)
    track_conditional: bool = False
    keep_packets: bool = False
    trace_path: str | Path | None = None

    def __post_init__(self):
        _check_window(self.warmup, self.measure)
        if self.service_time < 1:
            raise ConfigError(f"service time must be >= 1 cycle, got {self.service_time}")
        if self.link_latency < 0:
            raise ConfigError(f"link latency must be >= 0, got {self.link_latency}")


@dataclass
class CanonicalParams:
    """典型结构仿真参数"""
    rates: tuple[float, float, float] = (0.2, 0.2, 0.2)
    burst_prob: float = 0.0
    service_time: int = 1
    link_latency: int = 1
    warmup: int = 200_000
    measure: int = 2_000_000
    seed: int = 1
    percentiles: tuple[float, ...] = (50.0, 95.0, 99.0)
    track_conditional: bool = False

    def __post_init__(self):
        _check_window(self.warmup, self.measure)


@dataclass(frozen=True)
class PacketRecord:
    """单个包的注入与送达"""
    injection: int
    source: int
    destination: int
    delivery: int
    hops: int

    @property
    def latency(self) -> int:
        return self.delivery - self.injection


def _check_window(warmup: int, measure: int):
    if warmup < 0:
        raise ConfigError(f"warmup must be >= 0, got {warmup}")
    if measure <= 0:
        raise ConfigError(f"measure must be > 0, got {measure}")


def _percentile_key(p: float) -> str:
    return f"p{p:g}"


class SimEngine:
    """在队列图上运行的周期精确仿真"""

    def __init__(
        self,
        graph: QueueGraph,
        *,
        warmup: int,
        measure: int,
        seed: int,
        percentiles: tuple[float, ...] = (50.0, 95.0, 99.0),
        track_conditional: bool = False,
        keep_packets: bool = False,
        trace_path: str | Path | None = None,
    ):
        _check_window(warmup, measure)
        self.graph = graph
        self.warmup = warmup
        self.measure = measure
        self.end = warmup + measure
        self.seed = seed
        self.percentiles = tuple(percentiles)
        self.track_conditional = track_conditional
        self.keep_packets = keep_packets
        self.trace_path = trace_path
        self.packets: list[PacketRecord] = []

        self.queue_ids = list(graph.queue_classes)
        self.server_ids = list(graph.server_classes)
        queue_index = {q: i for i, q in enumerate(self.queue_ids)}
        server_index = {s: i for i, s in enumerate(self.server_ids)}

        self.route_queues = [[queue_index[h.queue] for h in hops] for hops in graph.routes]
        self.route_servers = [[server_index[h.server] for h in hops] for hops in graph.routes]
        self.queue_rank = [graph.ranks[q] for q in self.queue_ids]
        self.server_inputs: list[list[int]] = [[] for _ in self.server_ids]
        for q, servers in graph.queue_servers.items():
            for s in servers:
                self.server_inputs[server_index[s]].append(queue_index[q])
        for inputs in self.server_inputs:
            inputs.sort()

        seeds = spawn_seeds(seed, len(graph.flows) + 1)
        self.samplers = [GGeoSampler(f.arrival, seeds[i]) for i, f in enumerate(graph.flows)]
        # 同一周期多条流注入时的入队顺序
        self._order_rng = np.random.default_rng(seeds[-1])

    # ============ 主循环 ============

    def run(self) -> SimReport:
        graph = self.graph
        saturated = self._check_saturation()
        with diagnostic_bus.capture() as diagnostics:
            if saturated:
                for name, load in saturated:
                    emit_queue_saturated(name, load)
            self._simulate()
        report = self._report(bool(saturated), diagnostics)
        if self.trace_path is not None:
            write_trace(self.trace_path, self._trace)
        logger.info(
            f"Simulated {graph.label}: {report.injected} injected, {report.delivered} delivered, "
            f"mean latency {report.mean_latency}"
        )
        return report

    def _check_saturation(self) -> list[tuple[str, float]]:
        loads = []
        for q in self.queue_ids:
            load = self.graph.queue_load(q)
            if load >= 1:
                loads.append((str(q), load))
        for s in self.server_ids:
            load = self.graph.server_load(s)
            if load >= 1:
                loads.append((str(s), load))
        if loads:
            logger.warning(f"Offered load >= 1 at {len(loads)} queues/servers; results are saturated")
        return loads

    def _simulate(self):
        T = self.graph.service_time
        L = self.graph.link_latency
        warmup, end = self.warmup, self.end
        flows = self.graph.flows
        route_queues, route_servers = self.route_queues, self.route_servers
        queue_rank, server_inputs = self.queue_rank, self.server_inputs
        samplers = self.samplers
        order_rng = self._order_rng

        n_queues, n_servers = len(self.queue_ids), len(self.server_ids)
        queues: list[deque] = [deque() for _ in range(n_queues)]
        queue_free = [0] * n_queues
        server_free = [0] * n_servers
        server_serving: list[tuple[int, int] | None] = [None] * n_servers
        pointer = [0] * n_servers
        active: set[int] = set()

        queue_acc = [WaitAccumulator() for _ in range(n_queues)]
        server_busy = [0] * n_servers
        class_acc: dict[tuple[int, int], WaitAccumulator] = {}
        class_arrivals: dict[tuple[int, int], GapMoments] = {}
        class_departures: dict[tuple[int, int], GapMoments] = {}
        for key in self.graph.classes:
            class_acc[key] = WaitAccumulator()
            class_arrivals[key] = GapMoments()
            class_departures[key] = GapMoments()
        latencies: list[list[int]] = [[] for _ in flows]
        injected = [0] * len(flows)
        delivered = [0] * len(flows)
        conditional: dict[tuple[int, tuple[int, int], tuple[int, int]], int] = {}
        serving_cycles: dict[tuple[int, tuple[int, int]], int] = {}
        trace: list[TraceEvent] = []

        injections: list[tuple[int, int]] = [(samplers[f].next_gap(), f) for f in range(len(flows))]
        heapq.heapify(injections)
        links: list[tuple[int, int, int, int, int]] = []
        sequence = 0

        def enqueue(f: int, h: int, injected_at: int, cycle: int):
            qi = route_queues[f][h]
            queues[qi].append((f, h, injected_at, cycle))
            active.add(qi)
            if warmup <= cycle < end:
                class_arrivals[(f, h)].observe(cycle)

        t = 0
        while t < end:
            # 1. 到达: 同一周期各流的批量按随机顺序整体入队
            batches: list[list[int]] = []
            while injections and injections[0][0] <= t:
                cycle, f = heapq.heappop(injections)
                if batches and batches[-1][0] == f:
                    batches[-1][2] += 1
                else:
                    batches.append([f, cycle, 1])
                heapq.heappush(injections, (cycle + samplers[f].next_gap(), f))
            if len(batches) > 1:
                batches = [batches[i] for i in order_rng.permutation(len(batches))]
            for f, cycle, count in batches:
                injected[f] += count
                for _ in range(count):
                    trace.append(TraceEvent(cycle, flows[f].source, flows[f].destination))
                    enqueue(f, 0, cycle, cycle)

            while links and links[0][0] <= t:
                cycle, _, f, h, injected_at = heapq.heappop(links)
                if h == len(route_queues[f]):
                    delivered[f] += 1
                    if cycle < end and injected_at >= warmup:
                        latencies[f].append(cycle - injected_at)
                    if self.keep_packets:
                        flow = flows[f]
                        self.packets.append(PacketRecord(
                            injected_at, flow.source, flow.destination, cycle, h
                        ))
                else:
                    enqueue(f, h, injected_at, cycle)

            # 2. 仲裁
            requested = set()
            for qi in active:
                if queue_free[qi] <= t:
                    f, h, _, _ = queues[qi][0]
                    si = route_servers[f][h]
                    if server_free[si] <= t:
                        requested.add(si)

            for si in sorted(requested):
                inputs = server_inputs[si]
                best_rank = None
                candidates = []
                for position, qi in enumerate(inputs):
                    if not queues[qi] or queue_free[qi] > t:
                        continue
                    f, h, _, _ = queues[qi][0]
                    if route_servers[f][h] != si:
                        continue
                    rank = queue_rank[qi]
                    if best_rank is None or rank < best_rank:
                        best_rank, candidates = rank, [position]
                    elif rank == best_rank:
                        candidates.append(position)

                start = pointer[si]
                chosen = min(candidates, key=lambda p: (p - start) % len(inputs))
                pointer[si] = (chosen + 1) % len(inputs)
                qi = inputs[chosen]

                f, h, injected_at, arrived = queues[qi].popleft()
                if not queues[qi]:
                    active.discard(qi)
                done = t + T
                queue_free[qi] = done
                server_free[si] = done
                server_serving[si] = (f, h)
                heapq.heappush(links, (done + L, sequence, f, h + 1, injected_at))
                sequence += 1

                if warmup <= t < end:
                    wait = t - arrived
                    queue_acc[qi].add_wait(wait)
                    class_acc[(f, h)].add_wait(wait)
                queue_acc[qi].area += overlap(arrived, done, warmup, end)
                busy = overlap(t, done, warmup, end)
                queue_acc[qi].busy += busy
                server_busy[si] += busy
                if warmup <= done < end:
                    class_departures[(f, h)].observe(done)

            # 3. 条件占用采样
            if self.track_conditional and warmup <= t < end:
                for si in range(n_servers):
                    if server_free[si] <= t or server_serving[si] is None:
                        continue
                    serving = server_serving[si]
                    serving_cycles[(si, serving)] = serving_cycles.get((si, serving), 0) + 1
                    for qi in server_inputs[si]:
                        for f, h, _, _ in queues[qi]:
                            if route_servers[f][h] == si:
                                key = (si, (f, h), serving)
                                conditional[key] = conditional.get(key, 0) + 1

            # 4. 推进时间
            if active:
                t += 1
            else:
                upcoming = []
                if injections:
                    upcoming.append(injections[0][0])
                if links:
                    upcoming.append(links[0][0])
                if not upcoming:
                    break
                t = max(t + 1, min(upcoming))

        # 窗口结束时仍在排队的flit
        for qi, queue in enumerate(queues):
            for _, _, _, arrived in queue:
                queue_acc[qi].area += overlap(arrived, end, warmup, end)

        self._queue_acc = queue_acc
        self._server_busy = server_busy
        self._class_acc = class_acc
        self._class_arrivals = class_arrivals
        self._class_departures = class_departures
        self._latencies = latencies
        self._injected = injected
        self._delivered = delivered
        self._in_flight = sum(len(q) for q in queues) + len(links)
        self._conditional = conditional
        self._serving_cycles = serving_cycles
        self._trace = trace

    # ============ 报告 ============

    def _report(self, saturated: bool, diagnostics: dict[str, int]) -> SimReport:
        graph = self.graph
        measure = float(self.measure)

        flow_stats = []
        all_latencies = []
        for index, flow in enumerate(graph.flows):
            values = self._latencies[index]
            all_latencies.extend(values)
            percentiles = {}
            mean = None
            if values:
                array = np.asarray(values, dtype=float)
                mean = float(array.mean())
                for p in self.percentiles:
                    percentiles[_percentile_key(p)] = float(np.percentile(array, p))
            flow_stats.append(FlowStats(
                flow=index,
                source=flow.source,
                destination=flow.destination,
                hops=graph.hop_count(index),
                rate=flow.arrival.rate,
                packets=len(values),
                mean_latency=mean,
                percentiles=percentiles,
            ))

        queue_stats = []
        for qi, queue in enumerate(self.queue_ids):
            acc = self._queue_acc[qi]
            queue_stats.append(QueueStats(
                queue=str(queue),
                offered_load=graph.queue_load(queue),
                packets=acc.packets,
                mean_wait=acc.mean_wait(),
                mean_occupancy=acc.area / measure,
                utilization=acc.busy / measure,
            ))

        class_stats = []
        for key in sorted(graph.classes):
            hop_class = graph.classes[key]
            acc = self._class_acc[key]
            class_stats.append(ClassStats(
                flow=hop_class.flow,
                hop=hop_class.hop,
                queue=str(hop_class.queue),
                server=str(hop_class.server),
                packets=acc.packets,
                mean_wait=acc.mean_wait(),
                interarrival_scv=self._class_arrivals[key].scv(),
                interdeparture_scv=self._class_departures[key].scv(),
            ))

        server_stats = [
            ServerStats(
                server=str(server),
                offered_load=graph.server_load(server),
                utilization=self._server_busy[si] / measure,
            )
            for si, server in enumerate(self.server_ids)
        ]

        conditional = [
            ConditionalOccupancy(
                server=str(self.server_ids[si]),
                waiting_class=f"{m[0]}:{m[1]}",
                serving_class=f"{k[0]}:{k[1]}",
                value=count / self._serving_cycles[(si, k)],
                joint=count / measure,
            )
            for (si, m, k), count in sorted(self._conditional.items())
        ]

        return SimReport(
            warmup=self.warmup,
            measure=self.measure,
            seed=self.seed,
            flows=flow_stats,
            queues=queue_stats,
            classes=class_stats,
            servers=server_stats,
            injected=sum(self._injected),
            delivered=sum(self._delivered),
            in_flight=self._in_flight,
            mean_latency=float(np.mean(all_latencies)) if all_latencies else None,
            saturated=saturated,
            conditional=conditional,
            diagnostics=dict(diagnostics),
        )


# ============ 入口 ============

def simulate_graph(graph: QueueGraph, **options) -> SimReport:
    """在给定队列图上仿真"""
    return SimEngine(graph, **options).run()


def run_simulation(config: SimConfig) -> SimReport:
    """拓扑 + 流 的周期精确仿真"""
    if config.service_scv > 0:
        logger.warning("Simulator uses deterministic service; service_scv is ignored")
    graph = build_queue_graph(
        config.topology,
        config.flows,
        routing=config.routing,
        service_time=config.service_time,
        service_scv=0.0,
        link_latency=config.link_latency,
        arbitration=config.arbitration,
        check_stability=False,
    )
    return simulate_graph(
        graph,
        warmup=config.warmup,
        measure=config.measure,
        seed=config.seed,
        percentiles=config.percentiles,
        track_conditional=config.track_conditional,
        keep_packets=config.keep_packets,
        trace_path=config.trace_path,
    )


def run_canonical(structure: Structure | str, params: CanonicalParams) -> SimReport:
    """仿真三种典型优先级结构之一"""
    graph = canonical_graph(
        structure,
        params.rates,
        params.burst_prob,
        params.service_time,
        link_latency=params.link_latency,
        check_stability=False,
    )
    return simulate_graph(
        graph,
        warmup=params.warmup,
        measure=params.measure,
        seed=params.seed,
        percentiles=params.percentiles,
        track_conditional=params.track_conditional,
    )


def measure_conditional_occupancy(
    report: SimReport, *, joint: bool = False
) -> dict[tuple[str, str], float]:
    """
    n̄_mk 的仿真估计: 只在类 k 占用服务器的周期采样的类 m 排队长度的平均

    joint=True 时返回 E[n_m · 1{k 在服务}] (除以整个测量窗口).
    键为 (等待类, 服务类), 类记为 "flow:hop".
    """
    return {
        (entry.waiting_class, entry.serving_class): entry.joint if joint else entry.value
        for entry in report.conditional
    }
