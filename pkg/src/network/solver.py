"""
NocPerf - 网络级迭代分解求解

类 = (流, 跳), queue-node = (队列, 服务器). 外层不动点每轮:
1. 每个服务器上对 queue-node 做均值分析 (按服务器批量解线性方程组) 和最大熵分解;
2. 按物理FIFO队列计算各类的等待时间;
3. 按跳数顺序逐级传播到达SCV.
队列图在求解开始时展开成numpy数组, 迭代中不再构造对象.

queue-node 的视角:
- 队列分流且在该服务器上 rank 最高: 以离开队列的流 (已串行化) 进入虚拟队列;
- 否则按到达流: 第0跳为GGeo批量到达, 之后各跳由上游链路串行化.
"""
from dataclasses import dataclass
import logging
import time

import numpy as np

from src.core.analytic import P_ZERO_FLOOR, UTIL_HAT_CEILING, run_factor
from src.core.errors import InstabilityError, ModelBreakdownError, NonConvergenceError
from src.core.events import (
    diagnostic_bus,
    emit_load_clamped,
    emit_moment_clamped,
    emit_p_zero_clamped,
    emit_scv_floored,
    emit_wait_floored,
)
from src.core.models import ClassResult, FlowLatency, NetworkSolution, QueueWait, SolverConfig
from src.core.traffic import flow_departure_scv, train_continuation
from src.network.graph import ClassKey, FlowSpec, QueueGraph, classify_structures

logger = logging.getLogger(__name__)

# 另一 queue-node 相对于本 node 的优先级
_HIGHER, _EQUAL, _LOWER = 0, 1, 2

_NOISE = 1e-9


# ============ 图展开 ============

@dataclass
class _Layout:
    """队列图的数组形式"""
    keys: list[ClassKey]
    rate: np.ndarray
    hop: np.ndarray
    flow: np.ndarray
    upstream: np.ndarray                     # 上一跳的类下标, 第0跳为 -1
    beta: np.ndarray                         # 源端GGeo批量因子
    scv: np.ndarray                          # 初始到达SCV
    cls_queue: np.ndarray
    cls_node: np.ndarray
    queues: list
    queue_rate: np.ndarray
    node_server: np.ndarray
    node_slot: np.ndarray
    node_virtual: np.ndarray
    servers: list
    width: int
    pair_x: np.ndarray
    pair_k: np.ndarray
    pair_rel: np.ndarray
    levels: list[np.ndarray]                 # 第1, 2, ... 跳的类下标

    @property
    def node_count(self) -> int:
        return len(self.node_server)

    @classmethod
    def build(cls, graph: QueueGraph) -> "_Layout":
        keys = sorted(graph.classes)
        index = {key: i for i, key in enumerate(keys)}
        queues = list(graph.queue_classes)
        queue_index = {q: i for i, q in enumerate(queues)}
        servers = list(graph.server_classes)
        server_index = {s: i for i, s in enumerate(servers)}

        node_index: dict = {}
        node_queue, node_server, node_rank = [], [], []
        cls_queue, cls_node, upstream = [], [], []
        for flow, hop in keys:
            hop_class = graph.classes[(flow, hop)]
            node_key = (hop_class.queue, hop_class.server)
            if node_key not in node_index:
                node_index[node_key] = len(node_index)
                node_queue.append(queue_index[hop_class.queue])
                node_server.append(server_index[hop_class.server])
                node_rank.append(hop_class.rank)
            cls_queue.append(queue_index[hop_class.queue])
            cls_node.append(node_index[node_key])
            upstream.append(index[(flow, hop - 1)] if hop > 0 else -1)

        node_server = np.array(node_server, dtype=np.int64)
        node_rank = np.array(node_rank, dtype=np.int64)
        node_slot = np.zeros(len(node_server), dtype=np.int64)
        groups = [np.flatnonzero(node_server == s) for s in range(len(servers))]
        pair_x, pair_k = [], []
        for group in groups:
            node_slot[group] = np.arange(len(group))
            for x in group:
                for k in group:
                    if x != k:
                        pair_x.append(x)
                        pair_k.append(k)
        pair_x = np.array(pair_x, dtype=np.int64)
        pair_k = np.array(pair_k, dtype=np.int64)
        pair_rel = np.select(
            [node_rank[pair_k] < node_rank[pair_x], node_rank[pair_k] == node_rank[pair_x]],
            [_HIGHER, _EQUAL],
            default=_LOWER,
        )

        top_rank = np.array([node_rank[group].min() for group in groups])
        splits = np.array([graph.splits(queues[q]) for q in node_queue], dtype=bool)

        rate = np.array([graph.classes[key].rate for key in keys])
        hop = np.array([key[1] for key in keys], dtype=np.int64)
        cls_queue = np.array(cls_queue, dtype=np.int64)
        return cls(
            keys=keys,
            rate=rate,
            hop=hop,
            flow=np.array([key[0] for key in keys], dtype=np.int64),
            upstream=np.array(upstream, dtype=np.int64),
            beta=np.array([graph.flows[key[0]].arrival.beta for key in keys]),
            scv=np.array([graph.classes[key].arrival.scv for key in keys]),
            cls_queue=cls_queue,
            cls_node=np.array(cls_node, dtype=np.int64),
            queues=queues,
            queue_rate=np.bincount(cls_queue, weights=rate, minlength=len(queues)),
            node_server=node_server,
            node_slot=node_slot,
            node_virtual=splits & (node_rank == top_rank[node_server]),
            servers=servers,
            width=max(len(group) for group in groups),
            pair_x=pair_x,
            pair_k=pair_k,
            pair_rel=pair_rel,
            levels=[np.flatnonzero(hop == h) for h in range(1, int(hop.max()) + 1)],
        )


@dataclass
class _Sweep:
    """一轮外层迭代的结果"""
    wait: np.ndarray
    t_hat: np.ndarray
    scv_hat: np.ndarray
    queue_util: np.ndarray
    queue_scv: np.ndarray
    clamped_p_zero: int
    floored_scv: int
    floored_wait: int
    clamped_load: int


def _node_sum(layout: _Layout, values: np.ndarray) -> np.ndarray:
    return np.bincount(layout.cls_node, weights=values, minlength=layout.node_count)


def _pair_sum(layout: _Layout, values: np.ndarray) -> np.ndarray:
    return np.bincount(layout.pair_x, weights=values, minlength=layout.node_count)


def _queue_sum(layout: _Layout, values: np.ndarray) -> np.ndarray:
    return np.bincount(layout.cls_queue, weights=values, minlength=len(layout.queues))


# ============ 一轮迭代 ============

def _sweep(
    layout: _Layout,
    graph: QueueGraph,
    scv: np.ndarray,
    queue_util: np.ndarray,
    queue_scv: np.ndarray,
    strict: bool,
) -> _Sweep:
    T, service_scv = float(graph.service_time), graph.service_scv
    residual = 0.5 * (T - 1.0 + T * service_scv)
    rate, queue = layout.rate, layout.cls_queue
    rho = rate * T

    # queue-node 视角下的到达流
    virtual = layout.node_virtual[layout.cls_node]
    departed = flow_departure_scv(scv, queue_util[queue], queue_scv[queue], rate / layout.queue_rate[queue])
    view_scv = np.where(virtual, np.maximum(departed, 1.0 - rate), scv)
    serialized = virtual | (layout.hop > 0)
    independent = ~serialized
    beta = np.where(serialized, 0.0, layout.beta)
    continuation = np.where(serialized, train_continuation(rho, view_scv), rho)

    # queue-node 聚合量
    node_rate = _node_sum(layout, rate)
    node_util = node_rate * T
    coincident = _node_sum(layout, rho * independent)
    ahead = T * beta + independent * 0.5 * (coincident[layout.cls_node] - rho)
    safe_rate = np.where(node_rate > 0, node_rate, 1.0)
    self_work = _node_sum(layout, rate * ahead) / safe_rate
    run_load = _node_sum(layout, rho * continuation)
    square_load = _node_sum(layout, rho * rho)

    # 每个服务器上的均值分析
    high = layout.pair_rel == _HIGHER
    equal = layout.pair_rel == _EQUAL
    other_util = node_util[layout.pair_k]
    sigma_high = _pair_sum(layout, other_util * high)
    sigma_equal = _pair_sum(layout, other_util * equal)
    tau = run_factor(
        sigma_high,
        _pair_sum(layout, run_load[layout.pair_k] * high),
        _pair_sum(layout, square_load[layout.pair_k] * high),
    )
    server_residual = np.bincount(layout.node_server, weights=node_util, minlength=len(layout.servers)) * residual

    servers, slots, width = layout.node_server, layout.node_slot, layout.width
    matrix = np.zeros((len(layout.servers), width, width))
    matrix[:, np.arange(width), np.arange(width)] = 1.0
    rhs = np.zeros((len(layout.servers), width))
    matrix[servers, slots, slots] = 1.0 - sigma_high - node_util
    rhs[servers, slots] = server_residual[servers] + self_work + tau * sigma_high + 0.5 * sigma_equal
    coupled = high | equal
    x, k = layout.pair_x[coupled], layout.pair_k[coupled]
    matrix[servers[x], slots[x], slots[k]] = -other_util[coupled]
    node_wait = np.linalg.solve(matrix, rhs[..., None])[..., 0][servers, slots]

    # 最大熵分解
    exposure = np.select(
        [high, equal],
        [node_wait[layout.pair_x] + T, node_wait[layout.pair_x]],
        default=residual,
    )
    cross = other_util * node_rate[layout.pair_x] * exposure
    denominator = other_util + cross
    blocked = np.divide(other_util * cross, denominator, out=np.zeros_like(cross), where=denominator > 0)
    p_zero = 1.0 - node_util - _pair_sum(layout, blocked)
    decomposed = (_pair_sum(layout, cross) > 0) & (node_rate > 0)
    clamped = decomposed & (p_zero <= 0)
    if strict and clamped.any():
        node = int(np.flatnonzero(clamped)[0])
        raise ModelBreakdownError(
            f"queue-node at {layout.servers[servers[node]]}: empty probability "
            f"{p_zero[node]:.4g} <= 0 (decomposition breaks down)"
        )
    p_zero = np.where(clamped, P_ZERO_FLOOR, np.minimum(p_zero, 1.0))

    occupancy = node_rate * (node_wait + T)
    util_hat = np.where(decomposed, 1.0 - p_zero, node_util)
    arrival_scv = 1.0 - node_rate + 2.0 * self_work / T
    safe_util = np.where(util_hat > 0, util_hat, 1.0)
    raw_scv = ((1.0 - util_hat) * (2.0 * occupancy - util_hat) - util_hat * arrival_scv) / (safe_util * safe_util)
    node_t_hat = np.where(decomposed, util_hat / safe_rate, T)
    node_scv_hat = np.where(decomposed, np.maximum(raw_scv, 0.0), service_scv)
    floored_scv = int(np.count_nonzero(decomposed & (raw_scv < -_NOISE)))

    # 物理FIFO队列
    t_hat = node_t_hat[layout.cls_node]
    scv_hat = node_scv_hat[layout.cls_node]
    load_hat = rate * t_hat
    source = layout.hop == 0
    fifo_beta = np.where(source, layout.beta, 0.0)

    load = _queue_sum(layout, load_hat)
    saturated = load >= UTIL_HAT_CEILING
    if strict and saturated.any():
        q = int(np.flatnonzero(saturated)[0])
        offered = layout.queue_rate[q] * T
        raise ModelBreakdownError(
            f"queue {layout.queues[q]}: decomposed load {load[q]:.4f} saturates (offered {offered:.4f})"
        )
    load = np.minimum(load, UTIL_HAT_CEILING)

    busy = _queue_sum(layout, 0.5 * load_hat * (t_hat - 1.0 + t_hat * scv_hat))
    bulk = _queue_sum(layout, load_hat * t_hat * fifo_beta)
    together = _queue_sum(layout, load_hat * source)
    squares = _queue_sum(layout, load_hat * load_hat * source)
    base = (busy + bulk + 0.5 * (together * together - squares)) / (1.0 - load)
    wait = base[queue] + source * 0.5 * (together[queue] - load_hat) + t_hat * (fifo_beta + 1.0) - T
    floored_wait = int(np.count_nonzero(wait < -_NOISE))
    wait = np.maximum(wait, 0.0)

    # 队列的混合服务过程
    mean = _queue_sum(layout, rate * t_hat) / layout.queue_rate
    second = _queue_sum(layout, rate * t_hat * t_hat * (1.0 + scv_hat)) / layout.queue_rate
    mixture = np.maximum(0.0, second / (mean * mean) - 1.0)

    return _Sweep(
        wait=wait,
        t_hat=t_hat,
        scv_hat=scv_hat,
        queue_util=load,
        queue_scv=mixture,
        clamped_p_zero=int(np.count_nonzero(clamped)),
        floored_scv=floored_scv,
        floored_wait=floored_wait,
        clamped_load=int(np.count_nonzero(saturated)),
    )


def _propagate(
    layout: _Layout,
    scv: np.ndarray,
    queue_util: np.ndarray,
    queue_scv: np.ndarray,
) -> tuple[np.ndarray, int]:
    """按跳数顺序把上游队列的离开流传给下一跳, 结果不低于GGeo下限 1 - λ"""
    scv = scv.copy()
    clamped = 0
    for level in layout.levels:
        up = layout.upstream[level]
        q = layout.cls_queue[up]
        rate = layout.rate[level]
        target = flow_departure_scv(scv[up], queue_util[q], queue_scv[q], rate / layout.queue_rate[q])
        floor = 1.0 - rate
        low = target < floor
        clamped += int(np.count_nonzero(low))
        scv[level] = np.where(low, floor, target)
    return scv, clamped


def _relative(new: np.ndarray, old: np.ndarray) -> np.ndarray:
    return np.abs(new - old) / np.maximum(1.0, np.abs(new))


def _check_offered_load(graph: QueueGraph, layout: _Layout):
    T = graph.service_time
    for q, load in enumerate(layout.queue_rate * T):
        if load >= 1:
            raise InstabilityError(str(layout.queues[q]), float(load))
    server_load = np.bincount(
        layout.node_server,
        weights=_node_sum(layout, layout.rate) * T,
        minlength=len(layout.servers),
    )
    for s, load in enumerate(server_load):
        if load >= 1:
            server = layout.servers[s]
            raise InstabilityError(
                str(server), float(load), f"server {server} is unstable (utilization {load:.4f} >= 1)"
            )


# ============ 求解 ============

def solve_network(
    graph: QueueGraph,
    settings: SolverConfig | None = None,
    *,
    strict: bool = False,
) -> NetworkSolution:
    """迭代分解整个网络, 返回每个队列/类/流的结果"""
    settings = settings or SolverConfig()
    graph = classify_structures(graph)
    if not graph.classes:
        return NetworkSolution()
    started = time.perf_counter()

    layout = _Layout.build(graph)
    _check_offered_load(graph, layout)

    scv = layout.scv.copy()
    queue_util = layout.queue_rate * graph.service_time
    queue_scv = np.full(len(layout.queues), graph.service_scv)
    wait = np.zeros(len(layout.keys))

    residual, worst = float("inf"), None
    for iteration in range(1, settings.max_iterations + 1):
        sweep = _sweep(layout, graph, scv, queue_util, queue_scv, strict)
        new_scv, moment_clamped = _propagate(layout, scv, sweep.queue_util, sweep.queue_scv)

        change = np.maximum(_relative(sweep.wait, wait), _relative(new_scv, scv))
        worst_class = int(np.argmax(change))
        residual = float(change[worst_class])
        worst = layout.queues[layout.cls_queue[worst_class]]

        wait, scv = sweep.wait, new_scv
        queue_util, queue_scv = sweep.queue_util, sweep.queue_scv
        if iteration > 1 and residual <= settings.tolerance:
            break
    else:
        raise NonConvergenceError(
            f"network {graph.label} did not converge",
            iterations=settings.max_iterations,
            residual=residual,
            queue=str(worst) if worst is not None else None,
            last_iterate=dict(zip(layout.keys, wait.tolist())),
        )

    with diagnostic_bus.capture() as diagnostics:
        if sweep.clamped_p_zero:
            emit_p_zero_clamped(graph.label, P_ZERO_FLOOR, sweep.clamped_p_zero)
        if sweep.floored_scv:
            emit_scv_floored(graph.label, 0.0, sweep.floored_scv)
        if sweep.floored_wait:
            emit_wait_floored(graph.label, 0.0, sweep.floored_wait)
        if sweep.clamped_load:
            emit_load_clamped(graph.label, UTIL_HAT_CEILING, sweep.clamped_load)
        if moment_clamped:
            lowest = float(layout.rate.min())
            emit_moment_clamped(lowest, float(scv.min()), 1.0 - lowest, moment_clamped)

    elapsed = time.perf_counter() - started
    logger.info(
        f"Solved {graph.label}: {iteration} iterations, residual {residual:.2e}, "
        f"{elapsed * 1000:.1f} ms"
    )
    return _build_solution(graph, layout, sweep, scv, iteration, residual, diagnostics)


def _build_solution(
    graph: QueueGraph,
    layout: _Layout,
    sweep: _Sweep,
    scv: np.ndarray,
    iterations: int,
    residual: float,
    diagnostics: dict[str, int],
) -> NetworkSolution:
    T, L = graph.service_time, graph.link_latency
    queue_names = [str(q) for q in layout.queues]
    server_names = {s: str(s) for s in layout.servers}

    wait = sweep.wait.tolist()
    t_hat = sweep.t_hat.tolist()
    scv_hat = sweep.scv_hat.tolist()
    arrival_scv = scv.tolist()
    classes = []
    for i, key in enumerate(layout.keys):
        hop_class = graph.classes[key]
        classes.append(ClassResult.model_construct(
            flow=hop_class.flow,
            hop=hop_class.hop,
            queue=queue_names[layout.cls_queue[i]],
            server=server_names[hop_class.server],
            rank=hop_class.rank,
            rate=hop_class.rate,
            arrival_scv=arrival_scv[i],
            wait=wait[i],
            t_hat=t_hat[i],
            scv_hat=scv_hat[i],
        ))

    rate = layout.queue_rate
    weighted = _queue_sum(layout, layout.rate * sweep.wait)
    utilization = _queue_sum(layout, layout.rate * sweep.t_hat)
    queues = [
        QueueWait.model_construct(
            queue=queue_names[q],
            rank=graph.ranks[layout.queues[q]],
            rate=float(rate[q]),
            utilization=float(utilization[q]),
            wait=float(weighted[q] / rate[q]) if rate[q] > 0 else 0.0,
        )
        for q in range(len(layout.queues))
    ]

    flow_wait = np.bincount(layout.flow, weights=sweep.wait, minlength=len(graph.flows))
    flows = []
    total_rate = 0.0
    weighted_latency = 0.0
    for index, flow in enumerate(graph.flows):
        hops = graph.hop_count(index)
        latency = float(flow_wait[index]) + hops * (T + L)
        flows.append(FlowLatency.model_construct(
            flow=index,
            source=flow.source,
            destination=flow.destination,
            hops=hops,
            rate=flow.arrival.rate,
            burst_prob=flow.arrival.burst_prob,
            latency=latency,
            zero_load=graph.zero_load_latency(index),
        ))
        total_rate += flow.arrival.rate
        weighted_latency += flow.arrival.rate * latency

    return NetworkSolution(
        flows=flows,
        queues=queues,
        classes=classes,
        mean_latency=weighted_latency / total_rate if total_rate > 0 else 0.0,
        iterations=iterations,
        residual=residual,
        diagnostics=dict(diagnostics),
    )


def no_burst_baseline(
    graph: QueueGraph,
    settings: SolverConfig | None = None,
    *,
    strict: bool = False,
) -> NetworkSolution:
    """所有流的 p_b 置0后求解 (不考虑突发的基线)"""
    flows = [
        FlowSpec(f.source, f.destination, f.arrival.without_burst(), f.name)
        for f in graph.flows
    ]
    return solve_network(graph.with_flows(flows), settings, strict=strict)
