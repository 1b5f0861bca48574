"""
NocPerf - 按时间窗估计注入率与突发概率

每个窗口把到达事件送入与NoC服务速率相同的确定性虚拟队列, 求时间平均占用 n̄,
再由 GGeo/D/1 平均队长反解到达SCV:
    C_a^2 = 2 n̄ (1 - ρ) / ρ - (1 - ρ)
最后换算为突发概率. 每个窗口的虚拟队列从空开始.
"""
from collections import defaultdict
from typing import Iterable
import logging

from src.core.errors import ConfigError, InstabilityError, NonConvergenceError
from src.core.events import emit_window_flagged
from src.core.models import PointStatus, SolverConfig, WindowEstimate, WindowFlag, WindowLatency
from src.core.traffic import GGeoProcess, burst_from_scv
from src.network.graph import FlowSpec, build_queue_graph
from src.network.solver import solve_network
from src.topologies.base import Topology
from src.traceburst.trace import TraceEvent

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = 200_000

# 各应用的参考突发概率
APPLICATION_BURSTINESS: dict[str, float] = {
    "xalancbmk": 0.37,
    "mcf": 0.43,
    "gcc": 0.26,
    "bwaves": 0.53,
    "GemsFDTD": 0.26,
    "omnetpp": 0.18,
    "perlbench": 0.26,
    "SYSmark14se": 0.27,
}

_FLOOR_TOLERANCE = 1e-9


def application_burst_prob(name: str) -> float:
    """按应用名查参考 p_b (不区分大小写)"""
    for application, burst_prob in APPLICATION_BURSTINESS.items():
        if application.lower() == name.strip().lower():
            return burst_prob
    known = ", ".join(sorted(APPLICATION_BURSTINESS))
    raise ConfigError(f"unknown application '{name}' (known: {known})")


# ============ 分窗 ============

WindowKey = int | tuple[int, int]


def _key(event: TraceEvent, per_flow: bool) -> WindowKey:
    return (event.source, event.destination) if per_flow else event.source


def _check_window(window_len: int):
    if window_len < 1:
        raise ConfigError(f"window length must be >= 1 cycle, got {window_len}")


def group_windows(
    events: Iterable[TraceEvent],
    window_len: int = DEFAULT_WINDOW,
    *,
    per_flow: bool = False,
) -> tuple[int, list[WindowKey], dict[tuple[int, WindowKey], list[int]]]:
    """
    按 (窗口, 源) 或 (窗口, 流) 分组到达时刻

    返回 (窗口数, 出现过的键, 分组), 窗口 i 覆盖 [i·W, (i+1)·W).
    """
    _check_window(window_len)
    groups: dict[tuple[int, WindowKey], list[int]] = defaultdict(list)
    keys: set = set()
    windows = 0
    for event in events:
        window = event.cycle // window_len
        key = _key(event, per_flow)
        groups[(window, key)].append(event.cycle)
        keys.add(key)
        windows = max(windows, window + 1)
    return windows, sorted(keys), groups


def estimate_rate(
    events: Iterable[TraceEvent],
    window_len: int = DEFAULT_WINDOW,
    *,
    per_flow: bool = False,
) -> dict[int, dict[WindowKey, float]]:
    """每个窗口每个源 (或流) 的注入率 = 事件数 / 窗口长度"""
    windows, keys, groups = group_windows(events, window_len, per_flow=per_flow)
    return {
        window: {key: len(groups.get((window, key), ())) / window_len for key in keys}
        for window in range(windows)
    }


# ============ 虚拟队列 ============

def virtual_queue_occupancy(cycles: list[int], service_time: int, window_len: int) -> float:
    """确定性单服务器虚拟队列的时间平均占用 (等待 + 服务中)"""
    area = 0
    free_at = None
    for arrival in cycles:
        start = arrival if free_at is None else max(arrival, free_at)
        free_at = start + service_time
        area += free_at - arrival
    return area / window_len


def invert_occupancy(utilization: float, occupancy: float) -> float:
    """确定性服务下由平均队长反解到达SCV"""
    rho = utilization
    return 2.0 * occupancy * (1.0 - rho) / rho - (1.0 - rho)


def estimate_burstiness(
    events: Iterable[TraceEvent],
    service_time: int = 1,
    window_len: int = DEFAULT_WINDOW,
    *,
    per_flow: bool = False,
) -> list[WindowEstimate]:
    """每个窗口每个源 (或流) 的突发概率估计"""
    if service_time < 1:
        raise ConfigError(f"service time must be >= 1 cycle, got {service_time}")
    windows, keys, groups = group_windows(events, window_len, per_flow=per_flow)

    estimates: list[WindowEstimate] = []
    for window in range(windows):
        for key in keys:
            cycles = groups.get((window, key), [])
            source, destination = key if per_flow else (key, None)
            estimate = _estimate_window(window, window_len, source, destination, cycles, service_time)
            if estimate.flag in (WindowFlag.NO_BURST.value, WindowFlag.UNSTABLE.value):
                emit_window_flagged(window, key, estimate.flag)
            logger.debug(
                f"Window {window} key {key}: rate {estimate.rate:.4f}, "
                f"burst_prob {estimate.burst_prob}, flag {estimate.flag}"
            )
            estimates.append(estimate)
    return estimates


def _estimate_window(
    window: int,
    window_len: int,
    source: int,
    destination: int | None,
    cycles: list[int],
    service_time: int,
) -> WindowEstimate:
    common = dict(
        window=window,
        start=window * window_len,
        length=window_len,
        source=source,
        destination=destination,
        events=len(cycles),
    )
    if not cycles:
        return WindowEstimate(**common, rate=0.0, occupancy=0.0, flag=WindowFlag.EMPTY)

    rate = len(cycles) / window_len
    utilization = rate * service_time
    occupancy = virtual_queue_occupancy(cycles, service_time, window_len)
    if utilization >= 1:
        return WindowEstimate(**common, rate=rate, occupancy=occupancy, flag=WindowFlag.UNSTABLE)

    scv = invert_occupancy(utilization, occupancy)
    floor = 1.0 - rate
    if scv < floor - _FLOOR_TOLERANCE:
        return WindowEstimate(
            **common, rate=rate, occupancy=occupancy, arrival_scv=scv,
            burst_prob=0.0, flag=WindowFlag.NO_BURST,
        )
    return WindowEstimate(
        **common, rate=rate, occupancy=occupancy, arrival_scv=scv,
        burst_prob=burst_from_scv(rate, max(scv, floor)), flag=WindowFlag.OK,
    )


# ============ 按窗口求延迟 ============

def window_flows(
    estimates: list[WindowEstimate],
    topology: Topology,
) -> dict[int, list[FlowSpec]]:
    """
    把窗口估计变成流

    按源估计时每个源以均匀分布发往其他所有节点 (每条流 λ_s / (n - 1)),
    按流估计时直接使用 (src, dst) 的估计. 空窗口与不稳定窗口不产生流.
    """
    n = topology.node_count
    flows: dict[int, list[FlowSpec]] = defaultdict(list)
    for estimate in estimates:
        topology.check_node(estimate.source)
        if estimate.destination is not None:
            topology.check_node(estimate.destination)
        if estimate.burst_prob is None or estimate.rate <= 0:
            flows.setdefault(estimate.window, [])
            continue
        if estimate.destination is not None:
            process = GGeoProcess(estimate.rate, estimate.burst_prob)
            flows[estimate.window].append(FlowSpec(estimate.source, estimate.destination, process))
        else:
            process = GGeoProcess(estimate.rate / (n - 1), estimate.burst_prob)
            flows[estimate.window].extend(
                FlowSpec(estimate.source, dst, process)
                for dst in topology.nodes()
                if dst != estimate.source
            )
    return dict(flows)


def estimate_window_latency(
    events: Iterable[TraceEvent],
    topology: Topology,
    *,
    window_len: int = DEFAULT_WINDOW,
    service_time: int = 1,
    link_latency: int = 1,
    routing: str | None = None,
    arbitration: str = "priority",
    per_flow: bool = False,
    settings: SolverConfig | None = None,
) -> list[WindowLatency]:
    """逐窗口: 估计流量参数 -> 求解网络 -> 平均延迟"""
    estimates = estimate_burstiness(events, service_time, window_len, per_flow=per_flow)
    unstable = {e.window for e in estimates if e.flag == WindowFlag.UNSTABLE.value}
    flows_by_window = window_flows(estimates, topology)

    results: list[WindowLatency] = []
    for window in sorted(flows_by_window):
        flows = flows_by_window[window]
        if window in unstable:
            results.append(WindowLatency(window=window, flows=len(flows), status=PointStatus.UNSTABLE))
            continue
        if not flows:
            results.append(WindowLatency(window=window, flows=0))
            continue
        try:
            graph = build_queue_graph(
                topology, flows,
                routing=routing,
                service_time=service_time,
                link_latency=link_latency,
                arbitration=arbitration,
            )
            solution = solve_network(graph, settings)
        except InstabilityError as e:
            logger.warning(f"Window {window}: {e}")
            results.append(WindowLatency(window=window, flows=len(flows), status=PointStatus.UNSTABLE))
            continue
        except NonConvergenceError as e:
            logger.warning(f"Window {window}: {e}")
            results.append(
                WindowLatency(window=window, flows=len(flows), status=PointStatus.NONCONVERGED)
            )
            continue
        results.append(WindowLatency(
            window=window, flows=len(flows), mean_latency=solution.mean_latency,
        ))
    logger.info(f"Estimated latency for {len(results)} windows")
    return results
