"""
队列网络构建与求解测试
"""
import math
import time

import pytest

from src.core.analytic import (
    PriorityGroup,
    TrafficClassSpec,
    decompose_basic_priority,
    decompose_contention_high,
    decompose_contention_low,
)
from src.core.errors import DomainError, InstabilityError, NonConvergenceError
from src.core.models import Arbitration, SolverConfig, Structure
from src.core.traffic import GGeoProcess
from src.network import (
    INJECTION_RANK,
    THROUGH_RANK,
    FlowSpec,
    build_queue_graph,
    canonical_graph,
    classify_structures,
    flow_index,
    no_burst_baseline,
    solve_network,
    uniform_flows,
)
from src.network.canonical import SA, SB
from src.simulator import CanonicalParams, SimConfig, run_canonical, run_simulation
from src.topologies import INJECT, QueueId, ServerId
from src.topologies.mesh import MeshTopology


def flow(src, dst, rate, burst_prob=0.0) -> FlowSpec:
    return FlowSpec(src, dst, GGeoProcess(rate, burst_prob))


def spec(class_id, rate, burst_prob, rank=0) -> TrafficClassSpec:
    return TrafficClassSpec(class_id, GGeoProcess(rate, burst_prob).moments(), priority_rank=rank)


# ============ 构建 ============

def test_flow_endpoints_must_differ():
    with pytest.raises(DomainError):
        flow(2, 2, 0.1)


def test_single_flow_is_chain_of_single_class_queues(ring6):
    graph = build_queue_graph(ring6, [flow(0, 3, 0.2)])
    assert graph.hop_count(0) == 3
    assert len(graph.classes) == 3
    assert all(len(keys) == 1 for keys in graph.queue_classes.values())
    assert graph.zero_load_latency(0) == 6


def test_merging_flows_through_outranks_injection(ring6):
    graph = classify_structures(build_queue_graph(ring6, [flow(0, 2, 0.2), flow(1, 2, 0.2)]))
    server = ServerId(1, "cw")
    assert graph.ranks[QueueId(1, "cw")] == THROUGH_RANK
    assert graph.ranks[QueueId(1, INJECT)] == INJECTION_RANK
    (annotation,) = graph.structures_at(server)
    assert annotation.high == QueueId(1, "cw")
    assert annotation.low == QueueId(1, INJECT)
    assert annotation.structures == (Structure.BASIC,)


def test_mesh_uniform_ranks(mesh4):
    graph = build_queue_graph(mesh4, uniform_flows(mesh4, 0.2, 0.2))
    assert len(graph.flows) == 16 * 15
    for queue, rank in graph.ranks.items():
        expected = INJECTION_RANK if queue.port == INJECT else THROUGH_RANK
        assert rank == expected


def test_fair_arbitration_shares_one_level(ring6):
    graph = classify_structures(build_queue_graph(
        ring6, [flow(0, 2, 0.2), flow(1, 2, 0.2)], arbitration=Arbitration.FAIR.value
    ))
    assert set(graph.ranks.values()) == {0}
    (annotation,) = graph.structures_at(ServerId(1, "cw"))
    assert annotation.structures == (Structure.SHARED,)


def test_overloaded_queue_is_named(ring6):
    with pytest.raises(InstabilityError) as info:
        build_queue_graph(ring6, [flow(0, 1, 0.6), flow(0, 2, 0.5)])
    assert info.value.queue == "0.inject"
    assert info.value.utilization == pytest.approx(1.1)


def test_stability_check_can_be_skipped(ring6):
    graph = build_queue_graph(ring6, [flow(0, 1, 0.6), flow(0, 2, 0.5)], check_stability=False)
    assert graph.queue_load(QueueId(0, INJECT)) == pytest.approx(1.1)


def test_downstream_moments_use_departure_transform(ring6):
    graph = build_queue_graph(ring6, [flow(0, 2, 0.3, 0.4)])
    first = graph.classes[(0, 0)].arrival
    second = graph.classes[(0, 1)].arrival
    assert second.rate == first.rate
    assert second.scv == pytest.approx((1 - 0.09) * first.scv)


# ============ 结构识别 ============

@pytest.mark.parametrize("structure,server,expected", [
    (Structure.BASIC, SA, Structure.BASIC),
    (Structure.CONTENTION_LOW, SA, Structure.CONTENTION_LOW),
    (Structure.CONTENTION_HIGH, SB, Structure.CONTENTION_HIGH),
])
def test_canonical_layouts_classify(structure, server, expected):
    graph = classify_structures(canonical_graph(structure, (0.2, 0.2, 0.2), 0.2))
    (annotation,) = graph.structures_at(server)
    assert annotation.structures == (expected,)


def test_canonical_graph_omits_zero_rate_classes():
    graph = canonical_graph(Structure.CONTENTION_LOW, (0.2, 0.2, 0.0))
    assert [f.name for f in graph.flows] == ["class1", "class2"]
    assert flow_index(graph, "class2") == 1
    assert SB not in graph.server_classes
    with pytest.raises(KeyError):
        flow_index(graph, "class3")


def test_canonical_graph_rejects_shared_structure():
    with pytest.raises(DomainError):
        canonical_graph(Structure.SHARED, (0.2, 0.2))


# ============ 求解 ============

def test_basic_canonical_matches_decomposition(settings):
    graph = canonical_graph(Structure.BASIC, (0.2, 0.2), 0.4)
    solution = solve_network(graph, settings)
    assert solution.class_wait(0, 0) == pytest.approx(5.0 / 6.0, abs=1e-4)
    assert solution.class_wait(1, 0) == pytest.approx(31.0 / 18.0, abs=1e-4)
    assert solution.flow_latency(0) == pytest.approx(5.0 / 6.0 + 2.0, abs=1e-4)


def test_contention_low_canonical_matches_decomposition(settings):
    graph = canonical_graph(Structure.CONTENTION_LOW, (0.2, 0.2, 0.2), 0.2)
    solution = solve_network(graph, settings)
    direct = decompose_contention_low(spec(1, 0.2, 0.2), (spec(2, 0.2, 0.2), spec(3, 0.2, 0.2)))
    for index, class_id in enumerate((1, 2, 3)):
        assert solution.class_wait(index, 0) == pytest.approx(direct.waiting(class_id), rel=1e-4)


def test_contention_high_canonical_matches_decomposition(settings):
    graph = canonical_graph(Structure.CONTENTION_HIGH, (0.2, 0.2, 0.2), 0.4)
    solution = solve_network(graph, settings)
    direct = decompose_contention_high((spec(1, 0.2, 0.4), spec(2, 0.2, 0.4)), spec(3, 0.2, 0.4))
    for index, class_id in enumerate((1, 2, 3)):
        assert solution.class_wait(index, 0) == pytest.approx(direct.waiting(class_id), rel=1e-4)


def test_zero_load_latency_is_hop_floor(mesh4):
    graph = build_queue_graph(mesh4, uniform_flows(mesh4, 1e-6, 0.0))
    solution = solve_network(graph)
    for result in solution.flows:
        assert result.latency == pytest.approx(result.zero_load, abs=1e-3)


def test_latency_never_below_hop_floor(ring6):
    solution = solve_network(build_queue_graph(ring6, uniform_flows(ring6, 0.4, 0.4)))
    for result in solution.flows:
        assert result.latency >= result.zero_load - 1e-9


def test_queue_wait_is_rate_weighted_class_average(ring6):
    solution = solve_network(build_queue_graph(ring6, uniform_flows(ring6, 0.3, 0.2)))
    for queue in solution.queues:
        members = [c for c in solution.classes if c.queue == queue.queue]
        weighted = sum(c.rate * c.wait for c in members) / sum(c.rate for c in members)
        assert queue.wait == pytest.approx(weighted, rel=1e-12)


def test_uniform_ring_is_symmetric(ring6):
    solution = solve_network(build_queue_graph(ring6, uniform_flows(ring6, 0.3, 0.2)))
    for port in (INJECT, "cw", "ccw"):
        waits = [solution.queue_wait(f"{node}.{port}") for node in range(6)]
        assert max(waits) == pytest.approx(min(waits), rel=1e-5, abs=1e-9)


def test_solution_reports_iterations_and_diagnostics(ring6):
    solution = solve_network(build_queue_graph(ring6, uniform_flows(ring6, 0.3, 0.2)))
    assert solution.iterations >= 2
    assert solution.residual <= 1e-6
    assert isinstance(solution.diagnostics, dict)


def test_non_convergence_reports_last_iterate(ring6):
    graph = build_queue_graph(ring6, uniform_flows(ring6, 0.3, 0.2))
    with pytest.raises(NonConvergenceError) as info:
        solve_network(graph, SolverConfig(max_iterations=1))
    assert info.value.iterations == 1
    assert info.value.last_iterate


# ============ 无突发基线 ============

def test_baseline_equals_model_without_bursts(ring6):
    graph = build_queue_graph(ring6, uniform_flows(ring6, 0.3, 0.0))
    model = solve_network(graph)
    baseline = no_burst_baseline(graph)
    assert baseline.mean_latency == pytest.approx(model.mean_latency, rel=1e-9)


def test_baseline_underestimates_bursty_model(ring6):
    graph = build_queue_graph(ring6, uniform_flows(ring6, 0.6, 0.6))
    assert no_burst_baseline(graph).mean_latency < solve_network(graph).mean_latency


def test_latency_grows_with_burst_probability(mesh4):
    previous = 0.0
    for burst_prob in (0.0, 0.2, 0.4, 0.6):
        latency = solve_network(build_queue_graph(mesh4, uniform_flows(mesh4, 0.2, burst_prob))).mean_latency
        assert latency > previous
        previous = latency


def test_contention_low_without_bystander_is_basic(settings):
    graph = canonical_graph(Structure.CONTENTION_LOW, (0.2, 0.2, 0.0), 0.2)
    reduced = solve_network(graph, settings)
    basic = decompose_basic_priority(PriorityGroup((spec(1, 0.2, 0.2, 0), spec(2, 0.2, 0.2, 1))))
    assert reduced.class_wait(1, 0) == pytest.approx(basic.waiting(2), rel=1e-4)


def test_saturated_decomposition_still_solves(ring6, mesh4):
    # 原始负载 < 1, 但某些注入队列分解后的 ρ̂ 接近 1
    for topology, rate in ((ring6, 0.6), (mesh4, 0.5)):
        graph = build_queue_graph(topology, uniform_flows(topology, rate, 0.6))
        solution = solve_network(graph)
        assert math.isfinite(solution.mean_latency)
        assert solution.mean_latency > no_burst_baseline(graph).mean_latency


def test_no_flows_is_empty_solution(ring6):
    solution = solve_network(build_queue_graph(ring6, []))
    assert solution.flows == []
    assert solution.iterations == 0


def test_flow_order_does_not_change_latencies(ring6):
    flows = uniform_flows(ring6, 0.4, 0.4)
    forward = solve_network(build_queue_graph(ring6, flows))
    backward = solve_network(build_queue_graph(ring6, flows[::-1]))
    latency = {(f.source, f.destination): f.latency for f in forward.flows}
    for result in backward.flows:
        assert result.latency == pytest.approx(latency[(result.source, result.destination)], rel=1e-6)


@pytest.mark.parametrize("burst_prob", [0.0, 0.4])
def test_latency_grows_with_injection_rate(ring6, burst_prob):
    previous = 0.0
    for rate in (0.1, 0.2, 0.3, 0.4, 0.5):
        latency = solve_network(build_queue_graph(ring6, uniform_flows(ring6, rate, burst_prob))).mean_latency
        assert latency > previous
        previous = latency


def test_mesh6x6_solves_within_budget():
    mesh = MeshTopology(6, 6)
    graph = build_queue_graph(mesh, uniform_flows(mesh, 0.1, 0.2))
    timings = []
    for _ in range(3):
        started = time.perf_counter()
        solve_network(graph)
        timings.append(time.perf_counter() - started)
    assert min(timings) < 0.1


# ============ 与仿真对照 ============

SIM_WARMUP = 50_000
SIM_MEASURE = 1_000_000


@pytest.mark.slow
@pytest.mark.parametrize("structure,burst_prob", [
    (Structure.BASIC, 0.2),
    (Structure.BASIC, 0.4),
    (Structure.BASIC, 0.6),
    (Structure.CONTENTION_LOW, 0.2),
    (Structure.CONTENTION_LOW, 0.4),
    (Structure.CONTENTION_HIGH, 0.2),
    (Structure.CONTENTION_HIGH, 0.4),
    (Structure.CONTENTION_HIGH, 0.6),
])
def test_canonical_structures_track_simulation(structure, burst_prob):
    rates = (0.2, 0.2, 0.2)
    model = solve_network(canonical_graph(structure, rates, burst_prob))
    report = run_canonical(structure, CanonicalParams(
        rates=rates, burst_prob=burst_prob, warmup=SIM_WARMUP, measure=SIM_MEASURE, seed=11
    ))
    for result in model.classes:
        simulated = report.class_stats(result.flow, result.hop).mean_wait
        assert result.wait == pytest.approx(simulated, rel=0.15, abs=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("rate", [0.1, 0.3, 0.5, 0.6])
@pytest.mark.parametrize("burst_prob", [0.0, 0.2, 0.4, 0.6])
def test_single_queue_tracks_simulation(ring6, rate, burst_prob):
    flows = [FlowSpec(0, 1, GGeoProcess(rate, burst_prob))]
    model = solve_network(build_queue_graph(ring6, flows))
    report = run_simulation(SimConfig(ring6, flows, warmup=SIM_WARMUP, measure=SIM_MEASURE // 2, seed=5))
    simulated = report.queue_stats("0.inject").mean_wait
    assert model.queue_wait("0.inject") == pytest.approx(simulated, rel=0.1, abs=1e-3)


@pytest.mark.slow
@pytest.mark.parametrize("topology_name,rate", [("ring6", 0.1), ("mesh4", 0.2)])
@pytest.mark.parametrize("burst_prob", [0.2, 0.4, 0.6])
def test_low_load_network_tracks_simulation(request, topology_name, rate, burst_prob):
    topology = request.getfixturevalue(topology_name)
    flows = uniform_flows(topology, rate, burst_prob)
    model = solve_network(build_queue_graph(topology, flows))
    report = run_simulation(SimConfig(topology, flows, warmup=SIM_WARMUP, measure=SIM_MEASURE // 2, seed=3))
    assert model.mean_latency == pytest.approx(report.mean_latency, rel=0.08)


@pytest.mark.slow
@pytest.mark.parametrize("topology_name,rate", [("ring6", 0.1), ("ring6", 0.4), ("mesh4", 0.2), ("mesh4", 0.5)])
def test_no_burst_baseline_underestimates_bursty_simulation(request, topology_name, rate):
    topology = request.getfixturevalue(topology_name)
    flows = uniform_flows(topology, rate, 0.6)
    baseline = no_burst_baseline(build_queue_graph(topology, flows))
    report = run_simulation(SimConfig(topology, flows, warmup=SIM_WARMUP, measure=SIM_MEASURE // 2, seed=3))
    assert baseline.mean_latency < report.mean_latency
