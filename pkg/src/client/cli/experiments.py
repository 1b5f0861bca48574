"""
NocPerf - 实验点函数

每个函数处理一个 (p_b, λ) 点, 均为模块级函数, 可以被进程池 pickle.
"""
from dataclasses import dataclass
import logging

from src.core.config import TABLE_GRIDS
from src.core.errors import ConfigError, InstabilityError, NonConvergenceError
from src.core.models import (
    ComparisonRow,
    ExperimentConfig,
    NetworkSolution,
    PointStatus,
    Series,
    SimReport,
    SweepRow,
    TrafficPattern,
)
from src.core.traffic import GGeoProcess
from src.network.graph import FlowSpec, QueueGraph, build_queue_graph, uniform_flows
from src.network.solver import no_burst_baseline, solve_network
from src.simulator.engine import simulate_graph
from src.topologies.base import Topology
from src.topologies.registry import create_topology

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentPoint:
    """网格上的一个实验点"""
    config: ExperimentConfig
    burst_prob: float
    injection_rate: float


# ============ 构建 ============

def experiment_grid(config: ExperimentConfig, *, table: bool = False) -> list[tuple[float, float]]:
    """
    (p_b, λ) 网格, p_b 在外层

    table=True 时使用该拓扑在误差表中的网格, 否则为 sweep 轴的笛卡尔积.
    """
    if table:
        label = create_topology(config.topology).label
        if label not in TABLE_GRIDS:
            known = ", ".join(sorted(TABLE_GRIDS))
            raise ConfigError(f"no built-in table grid for {label} (known: {known})")
        return [(p, rate) for p, rates in TABLE_GRIDS[label].items() for rate in rates]
    return [(p, rate) for p in config.burst_axis() for rate in config.rate_axis()]


def experiment_points(config: ExperimentConfig, *, table: bool = False) -> list[ExperimentPoint]:
    return [ExperimentPoint(config, p, rate) for p, rate in experiment_grid(config, table=table)]


def config_flows(
    config: ExperimentConfig,
    topology: Topology,
    injection_rate: float,
    burst_prob: float,
) -> list[FlowSpec]:
    """uniform 模式按点生成流; explicit 模式使用配置中的流"""
    if config.traffic.pattern == TrafficPattern.EXPLICIT.value:
        return [
            FlowSpec(f.src, f.dst, GGeoProcess(f.rate, f.burst_prob))
            for f in config.traffic.flows
        ]
    return uniform_flows(topology, injection_rate, burst_prob)


def point_graph(point: ExperimentPoint, *, check_stability: bool = True) -> QueueGraph:
    config = point.config
    topology = create_topology(config.topology)
    flows = config_flows(config, topology, point.injection_rate, point.burst_prob)
    return build_queue_graph(
        topology,
        flows,
        routing=config.routing,
        service_time=config.service.service_time,
        service_scv=config.service.service_scv,
        link_latency=config.service.link_latency,
        arbitration=config.arbitration,
        check_stability=check_stability,
    )


# ============ 点函数 ============

def analyze_point(point: ExperimentPoint, baseline: bool = False) -> NetworkSolution:
    """解析求解一个点, 错误向上抛出"""
    graph = point_graph(point)
    if baseline:
        return no_burst_baseline(graph, point.config.solver)
    return solve_network(graph, point.config.solver)


def simulate_point(point: ExperimentPoint) -> SimReport:
    """仿真一个点 (过载时照常运行并标记 saturated)"""
    simulation = point.config.simulation
    return simulate_graph(
        point_graph(point, check_stability=False),
        warmup=simulation.warmup,
        measure=simulation.measure,
        seed=simulation.seed,
        percentiles=tuple(simulation.percentiles),
    )


def _guarded_latency(point: ExperimentPoint, baseline: bool) -> tuple[float | None, PointStatus]:
    try:
        return analyze_point(point, baseline).mean_latency, PointStatus.OK
    except InstabilityError as e:
        logger.warning(f"Point p_b={point.burst_prob}, λ={point.injection_rate}: {e}")
        return None, PointStatus.UNSTABLE
    except NonConvergenceError as e:
        logger.warning(f"Point p_b={point.burst_prob}, λ={point.injection_rate}: {e}")
        return None, PointStatus.NONCONVERGED


def _error_pct(value: float | None, reference: float | None) -> float | None:
    if value is None or reference is None or reference == 0:
        return None
    return (value - reference) / reference * 100.0


def compare_point(point: ExperimentPoint) -> ComparisonRow:
    """解析模型 / 无突发基线 / 仿真 三者对比"""
    label = create_topology(point.config.topology).label
    analytic, status = _guarded_latency(point, baseline=False)
    if status == PointStatus.UNSTABLE:
        return ComparisonRow(
            topology=label,
            burst_prob=point.burst_prob,
            injection_rate=point.injection_rate,
            status=status,
        )

    baseline, _ = _guarded_latency(point, baseline=True)
    simulated = simulate_point(point).mean_latency

    row = ComparisonRow(
        topology=label,
        burst_prob=point.burst_prob,
        injection_rate=point.injection_rate,
        analytic=analytic,
        simulated=simulated,
        baseline=baseline,
        status=status,
    )
    if status == PointStatus.OK:
        error = _error_pct(analytic, simulated)
        row.error_pct = abs(error) if error is not None else None
        row.baseline_error_pct = _error_pct(baseline, simulated)
    return row


def sweep_point(point: ExperimentPoint, simulate: bool = True) -> list[SweepRow]:
    """一个点上的长格式曲线数据"""
    label = create_topology(point.config.topology).label
    common = dict(topology=label, burst_prob=point.burst_prob, injection_rate=point.injection_rate)

    rows = []
    for series, baseline in ((Series.ANALYTIC, False), (Series.BASELINE, True)):
        latency, status = _guarded_latency(point, baseline)
        rows.append(SweepRow(**common, series=series, latency=latency, status=status))

    if simulate:
        if rows[0].status == PointStatus.UNSTABLE.value:
            rows.append(SweepRow(**common, series=Series.SIMULATION, status=PointStatus.UNSTABLE))
        else:
            report = simulate_point(point)
            rows.append(SweepRow(**common, series=Series.SIMULATION, latency=report.mean_latency))
    return rows
