"""
优先级分解测试
"""
import pytest
from hypothesis import assume, given, settings as hyp_settings, strategies as st

from src.core.analytic import (
    P_ZERO_FLOOR,
    UTIL_HAT_CEILING,
    DecomposedClass,
    ModifiedService,
    PriorityGroup,
    QueueNode,
    TrafficClassSpec,
    cross_occupancy,
    decompose_basic_priority,
    decompose_contention_high,
    decompose_contention_low,
    ggeo_g1_occupancy,
    modified_service_scv,
    modified_service_time,
    p_zero,
    run_factor,
    shared_server_waits,
    waiting_time,
)
from src.core.errors import DomainError, InstabilityError, ModelBreakdownError, NonConvergenceError
from src.core.events import diagnostic_bus
from src.core.models import SolverConfig
from src.core.traffic import GGeoProcess, MomentPair, flow_departure


def ggeo(rate: float, burst_prob: float = 0.0) -> MomentPair:
    return GGeoProcess(rate, burst_prob).moments()


def spec(class_id, rate, burst_prob=0.0, rank=0, queue=None, service_time=1.0) -> TrafficClassSpec:
    return TrafficClassSpec(
        class_id, ggeo(rate, burst_prob), service_time=service_time,
        priority_rank=rank, queue_id=queue,
    )


def single(rate, burst_prob=0.0) -> DecomposedClass:
    return DecomposedClass("m", ggeo(rate, burst_prob), 1.0, 1.0, 0.0)


# ============ 闭式核函数 ============

def test_occupancy_memoryless_limit():
    assert ggeo_g1_occupancy(0.5, 1.0, 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("rate", [0.1, 0.5, 0.9])
def test_occupancy_of_bernoulli_unit_service_is_utilization(rate):
    assert ggeo_g1_occupancy(rate, 1.0 - rate, 0.0) == pytest.approx(rate)


def test_occupancy_bursty_value():
    # 0.6 · (0.4 + 2.8) / 0.8
    assert ggeo_g1_occupancy(0.6, 2.8, 0.0) == pytest.approx(2.4)


def test_occupancy_rejects_unstable_queue():
    with pytest.raises(InstabilityError):
        ggeo_g1_occupancy(1.0, 1.0, 0.0)


@given(
    st.floats(min_value=0.01, max_value=0.95),
    st.floats(min_value=0.0, max_value=10.0),
    st.floats(min_value=0.0, max_value=5.0),
)
def test_occupancy_inversion_recovers_service_scv(rho, arrival_scv, service_scv):
    occupancy = ggeo_g1_occupancy(rho, arrival_scv, service_scv)
    recovered = modified_service_scv(rho, occupancy, arrival_scv)
    assert recovered == pytest.approx(service_scv, abs=1e-10 * max(1.0, occupancy / rho ** 2))


def test_modified_scv_memoryless_example():
    assert modified_service_scv(0.5, 1.0, 1.0) == pytest.approx(1.0)


def test_modified_scv_floors_negative_values():
    with diagnostic_bus.capture() as captured:
        assert modified_service_scv(0.5, 0.1, 1.0, class_id="c") == 0.0
    assert captured == {"scv_floored": 1}


def test_p_zero_without_contention():
    assert p_zero(0.3, []) == pytest.approx(0.7)
    assert p_zero(0.3, [(0.2, 0.0)]) == pytest.approx(0.7)


def test_p_zero_substitution():
    assert p_zero(0.3, [(0.2, 0.1)]) == pytest.approx(1 - 0.3 - 0.2 * 0.1 / 0.3)


def test_p_zero_breakdown_clamps_or_raises():
    others = [(0.6, 5.0)]
    with diagnostic_bus.capture() as captured:
        assert p_zero(0.5, others, class_id="low") == P_ZERO_FLOOR
    assert captured == {"p_zero_clamped": 1}
    with pytest.raises(ModelBreakdownError):
        p_zero(0.5, others, strict=True, class_id="low")


@given(
    st.floats(min_value=0.0, max_value=0.5),
    st.lists(
        st.tuples(st.floats(min_value=0.0, max_value=0.4), st.floats(min_value=0.0, max_value=0.2)),
        max_size=3,
    ),
)
def test_p_zero_bounds(own, others):
    value = p_zero(own, others)
    assert 0 < value <= 1.0 - own + 1e-12


def test_modified_service_time():
    assert modified_service_time(0.2, 0.8) == pytest.approx(1.0)
    assert modified_service_time(0.2, 0.7) == pytest.approx(1.5)
    with pytest.raises(DomainError):
        modified_service_time(0.0, 0.5)


def test_cross_occupancy():
    assert cross_occupancy(0.0, 2.0, 0.3) == 0.0
    assert cross_occupancy(0.2, 2.0, 0.0) == 0.0
    assert cross_occupancy(0.2, 2.0, 0.3) == pytest.approx(0.12)


# ============ 等待时间 ============

def test_bernoulli_unit_service_never_waits():
    assert waiting_time([single(0.5)])["m"] == 0.0


def test_bursty_single_class_wait():
    # β = 0.25: 0.125 / 0.5 + 1.25 - 1
    assert waiting_time([single(0.5, 0.2)])["m"] == pytest.approx(0.5)


def test_waiting_time_rejects_offered_overload():
    heavy = DecomposedClass("m", ggeo(0.5), 2.0, 2.0, 0.0)
    with pytest.raises(InstabilityError):
        waiting_time([heavy])


def test_saturated_decomposed_load_is_clamped():
    # 原始负载 0.5, 分解后 ρ̂ = 1: 截断到 UTIL_HAT_CEILING
    heavy = DecomposedClass("m", ggeo(0.5), 1.0, 2.0, 0.0)
    with diagnostic_bus.capture() as captured:
        wait = waiting_time([heavy])["m"]
    assert captured == {"load_clamped": 1}
    assert wait == pytest.approx(0.5 / (1.0 - UTIL_HAT_CEILING) + 1.0)
    with pytest.raises(ModelBreakdownError):
        waiting_time([heavy], strict=True)


def test_coincident_bernoulli_arrivals_match_batch_queue():
    # 两个独立Bernoulli(0.2)流: E[A(A-1)] / (2λ(1-λ)) = 0.08 / 0.48
    a = DecomposedClass("a", ggeo(0.2), 1.0, 1.0, 0.0)
    b = DecomposedClass("b", ggeo(0.2), 1.0, 1.0, 0.0)
    waits = waiting_time([a, b])
    assert waits["a"] == pytest.approx(1.0 / 6.0)
    assert waits["b"] == pytest.approx(1.0 / 6.0)


def test_serialized_classes_never_collide():
    a = DecomposedClass("a", ggeo(0.2), 1.0, 1.0, 0.0, serialized=True)
    b = DecomposedClass("b", ggeo(0.2), 1.0, 1.0, 0.0, serialized=True)
    assert waiting_time([a, b]) == {"a": 0.0, "b": 0.0}


@hyp_settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=0.5),
    st.floats(min_value=0.0, max_value=0.6),
    st.floats(min_value=1.0, max_value=1.8),
    st.floats(min_value=0.0, max_value=3.0),
)
def test_single_class_wait_obeys_ggeo_occupancy(rate, burst_prob, t_hat, scv_hat):
    # 分解后的单类队列: 等待时间与 n̄ = λ(W + T) 互为逆运算
    assume(rate * t_hat < 0.95)
    arrival = ggeo(rate, burst_prob)
    wait = waiting_time([DecomposedClass("m", arrival, 1.0, t_hat, scv_hat)])["m"]
    occupancy = ggeo_g1_occupancy(rate * t_hat, arrival.scv, scv_hat)
    assert occupancy == pytest.approx(rate * (wait + 1.0), rel=1e-9)


def test_shared_queue_members_wait_alike_with_equal_service():
    a = DecomposedClass("a", ggeo(0.2, 0.3), 1.0, 1.3, 0.4)
    b = DecomposedClass("b", ggeo(0.2, 0.3), 1.0, 1.3, 0.4)
    waits = waiting_time([a, b])
    assert waits["a"] == pytest.approx(waits["b"])


# ============ 共享服务器 ============

def test_shared_server_two_priority_levels():
    group = PriorityGroup((spec(1, 0.2, rank=0), spec(2, 0.2, rank=1)))
    waits, iterations = shared_server_waits(group)
    assert waits[1] == pytest.approx(0.0, abs=1e-9)
    assert waits[2] == pytest.approx(1.0 / 3.0, abs=1e-5)
    assert iterations >= 1


def test_shared_server_bursty_two_levels():
    group = PriorityGroup((spec(1, 0.2, 0.4, rank=0), spec(2, 0.2, 0.4, rank=1)))
    waits, _ = shared_server_waits(group)
    assert waits[1] == pytest.approx(5.0 / 6.0, abs=1e-5)
    assert waits[2] == pytest.approx(31.0 / 18.0, abs=1e-5)


def test_shared_server_non_convergence():
    group = PriorityGroup((spec(1, 0.3, 0.5, rank=0), spec(2, 0.3, 0.5, rank=1)))
    with pytest.raises(NonConvergenceError) as info:
        shared_server_waits(group, SolverConfig(max_iterations=1))
    assert info.value.iterations == 1
    assert set(info.value.last_iterate) == {1, 2}


def test_run_factor_is_one_for_independent_slots():
    assert run_factor(0.2, 0.2 * 0.2, 0.04) == pytest.approx(1.0)
    assert run_factor(0.0, 0.0, 0.0) == 1.0


def test_run_factor_grows_with_train_continuation():
    # a_H = (0.1 - 0.04) / 0.2 + 0.2 = 0.5
    assert run_factor(0.2, 0.2 * 0.5, 0.04) == pytest.approx(1.6)


def test_serialized_high_trains_lengthen_low_wait():
    def low_wait(high_scv):
        high = TrafficClassSpec(1, MomentPair(0.2, high_scv), priority_rank=0, serialized=True)
        waits, _ = shared_server_waits(PriorityGroup((high, spec(2, 0.2, rank=1))))
        return waits[2]

    # SCV 0.8 = 1 - λ: 串行化的Bernoulli流, 与独立到达的结果相同
    assert low_wait(0.8) == pytest.approx(1.0 / 3.0, abs=1e-5)
    assert low_wait(2.0) > low_wait(0.8)


def test_group_validation():
    with pytest.raises(DomainError):
        PriorityGroup(())
    with pytest.raises(DomainError):
        PriorityGroup((spec(1, 0.1), spec(1, 0.1)))
    with pytest.raises(InstabilityError):
        PriorityGroup((spec(1, 0.6), spec(2, 0.5, rank=1)))


def test_queue_nodes_group_classes_by_queue():
    group = PriorityGroup((
        spec("a", 0.1, rank=0, queue="q1"),
        spec("b", 0.2, rank=0, queue="q1"),
        spec("c", 0.1, rank=1, queue="q2"),
    ))
    first, second = group.nodes()
    assert isinstance(first, QueueNode)
    assert [c.class_id for c in first.members] == ["a", "b"]
    assert first.rate == pytest.approx(0.3)
    assert first.rank == 0
    assert second.rank == 1


def test_queue_node_self_work_counts_same_slot_arrivals():
    node = QueueNode("q", (spec("a", 0.2), spec("b", 0.2)))
    # 无突发: 每个flit平均有 ½ρ 的其他类工作量同slot排在前面
    assert node.self_work == pytest.approx(0.1)
    assert node.arrival_scv == pytest.approx(1.0 - 0.4 + 0.2)
    serialized = QueueNode("q", (
        TrafficClassSpec("a", ggeo(0.2), serialized=True),
        TrafficClassSpec("b", ggeo(0.2), serialized=True),
    ))
    assert serialized.self_work == 0.0


def test_queue_cannot_mix_priority_ranks():
    with pytest.raises(DomainError):
        PriorityGroup((spec("a", 0.1, rank=0, queue="q"), spec("b", 0.1, rank=1, queue="q")))


def test_class_spec_validation():
    with pytest.raises(DomainError):
        spec(1, 0.1, service_time=0.5)
    with pytest.raises(InstabilityError):
        spec(1, 0.6, service_time=2.0)


# ============ 基本优先级分解 ============

def test_single_class_group_is_unmodified():
    solution = decompose_basic_priority(PriorityGroup((spec("a", 0.5, 0.2),)))
    modified = solution.modified("a")
    assert modified.t_hat == 1.0
    assert modified.scv_hat == 0.0
    assert solution.waiting("a") == pytest.approx(waiting_time([single(0.5, 0.2)])["m"])


def test_two_class_priority_without_bursts():
    group = PriorityGroup((spec(1, 0.2, rank=0), spec(2, 0.2, rank=1)))
    solution = decompose_basic_priority(group)
    assert solution.waiting(1) == pytest.approx(0.0, abs=1e-9)
    assert solution.waiting(2) == pytest.approx(1.0 / 3.0, abs=1e-4)
    assert solution.modified(1).t_hat == 1.0
    assert solution.modified(2).t_hat > 1.0


def test_two_class_priority_with_bursts():
    group = PriorityGroup((spec(1, 0.2, 0.4, rank=0), spec(2, 0.2, 0.4, rank=1)))
    solution = decompose_basic_priority(group)
    assert solution.waiting(1) == pytest.approx(5.0 / 6.0, abs=1e-4)
    assert solution.waiting(2) == pytest.approx(31.0 / 18.0, abs=1e-4)
    low = solution.modified(2)
    assert low.t_hat == pytest.approx(1.3525, abs=1e-3)
    assert low.scv_hat == pytest.approx(0.273, abs=1e-2)
    assert solution.waiting(1) < solution.waiting(2)


@pytest.mark.parametrize("burst_prob", [0.0, 0.4])
def test_decomposed_waits_reproduce_shared_server_waits(burst_prob):
    group = PriorityGroup((spec(1, 0.2, burst_prob, rank=0), spec(2, 0.2, burst_prob, rank=1)))
    solution = decompose_basic_priority(group)
    for class_id in (1, 2):
        assert solution.waiting(class_id) == pytest.approx(
            solution.shared_waits[class_id], rel=1e-6, abs=1e-9
        )


def test_decomposed_occupancy_obeys_little():
    group = PriorityGroup((spec(1, 0.25, 0.3, rank=0), spec(2, 0.15, 0.3, rank=1)))
    solution = decompose_basic_priority(group)
    for class_id in (1, 2):
        result = solution[class_id]
        rate = 0.25 if class_id == 1 else 0.15
        assert result.occupancy == pytest.approx(rate * (result.waiting + 1.0), rel=1e-4)


def test_same_rank_queues_are_symmetric():
    group = PriorityGroup((spec("a", 0.2, 0.2, rank=0, queue="qa"), spec("b", 0.2, 0.2, rank=0, queue="qb")))
    solution = decompose_basic_priority(group)
    assert solution.waiting("a") == pytest.approx(solution.waiting("b"), rel=1e-6)


def test_same_rank_classes_share_one_queue_by_default():
    group = PriorityGroup((spec("a", 0.2, 0.2), spec("b", 0.2, 0.2)))
    solution = decompose_basic_priority(group)
    # 同一队列内没有交叉占用, 服务过程不变
    assert solution.cross_occupancy == {}
    assert solution.modified("a").t_hat == 1.0
    assert solution.waiting("a") == pytest.approx(solution.waiting("b"))


def test_zero_rate_class_is_identity():
    group = PriorityGroup((spec(1, 0.3, 0.2, rank=0), TrafficClassSpec(2, MomentPair(0.0, 0.0), priority_rank=1)))
    solution = decompose_basic_priority(group)
    assert solution.modified(2) == ModifiedService.identity(group.classes[1])


@hyp_settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=0.3),
    st.floats(min_value=0.05, max_value=0.3),
    st.floats(min_value=0.0, max_value=0.5),
)
def test_high_priority_never_waits_longer(rate_high, rate_low, burst_prob):
    group = PriorityGroup((spec(1, rate_high, burst_prob, rank=0), spec(2, rate_low, burst_prob, rank=1)))
    waits, _ = shared_server_waits(group)
    assert waits[1] <= waits[2] + 1e-9


@pytest.mark.parametrize("burst_prob", [0.0, 0.2, 0.4])
def test_low_class_wait_grows_with_high_class_rate(burst_prob):
    previous = -1.0
    for rate in (0.05, 0.1, 0.2, 0.3):
        group = PriorityGroup((spec(1, rate, burst_prob, rank=0), spec(2, 0.2, burst_prob, rank=1)))
        wait = decompose_basic_priority(group).waiting(2)
        assert wait >= previous - 1e-9
        previous = wait


def test_wait_grows_with_burst_probability():
    previous = -1.0
    for burst_prob in (0.0, 0.2, 0.4, 0.6):
        group = PriorityGroup((spec(1, 0.2, burst_prob, rank=0), spec(2, 0.2, burst_prob, rank=1)))
        solution = decompose_basic_priority(group)
        assert solution.waiting(2) >= previous - 1e-9
        previous = solution.waiting(2)


# ============ 竞争结构 ============

def test_contention_low_reduces_to_basic_without_bystander():
    high = spec(1, 0.2, 0.2)
    contender = spec(2, 0.2, 0.2)
    bystander = TrafficClassSpec(3, MomentPair(0.0, 0.0))
    reduced = decompose_contention_low(high, (contender, bystander))
    basic = decompose_basic_priority(
        PriorityGroup((spec(1, 0.2, 0.2, rank=0), spec(2, 0.2, 0.2, rank=1)))
    )
    assert reduced.waiting(1) == pytest.approx(basic.waiting(1), rel=1e-9)
    assert reduced.waiting(2) == pytest.approx(basic.waiting(2), rel=1e-9)


def test_contention_low_without_high_traffic_is_plain_fifo():
    high = TrafficClassSpec(1, MomentPair(0.0, 0.0))
    contender = spec(2, 0.2, 0.2)
    bystander = spec(3, 0.2, 0.2)
    solution = decompose_contention_low(high, (contender, bystander))
    fifo = waiting_time([
        DecomposedClass(2, ggeo(0.2, 0.2), 1.0, 1.0, 0.0),
        DecomposedClass(3, ggeo(0.2, 0.2), 1.0, 1.0, 0.0),
    ])
    assert solution.waiting(2) == pytest.approx(fifo[2])
    assert solution.waiting(3) == pytest.approx(fifo[3])
    assert solution.waiting(2) == pytest.approx(solution.waiting(3))


def test_contention_low_bystander_is_delayed_by_contender():
    solution = decompose_contention_low(spec(1, 0.2, 0.2), (spec(2, 0.2, 0.2), spec(3, 0.2, 0.2)))
    alone = waiting_time([single(0.2, 0.2), DecomposedClass(3, ggeo(0.2, 0.2), 1.0, 1.0, 0.0)])
    assert solution.modified(3).t_hat == 1.0
    assert solution.waiting(3) > alone[3]


def test_contention_high_without_bystander_matches_dedicated_queue():
    bystander = TrafficClassSpec(1, MomentPair(0.0, 0.0))
    contender = spec(2, 0.2, 0.4)
    low = spec(3, 0.2, 0.4)
    solution = decompose_contention_high((bystander, contender), low)

    departure = flow_departure(contender.arrival, 0.2, 0.0, 1.0)
    basic = decompose_basic_priority(PriorityGroup((
        TrafficClassSpec(2, departure, priority_rank=0, serialized=True),
        spec(3, 0.2, 0.4, rank=1),
    )))
    assert solution.waiting(3) == pytest.approx(basic.waiting(3), rel=1e-9)
    assert solution.modified(3) == basic.modified(3)


def test_contention_high_without_contender_leaves_low_unmodified():
    bystander = spec(1, 0.2, 0.4)
    contender = TrafficClassSpec(2, MomentPair(0.0, 0.0))
    low = spec(3, 0.2, 0.4)
    solution = decompose_contention_high((bystander, contender), low)
    assert solution.modified(3).t_hat == 1.0
    assert solution.waiting(3) == pytest.approx(waiting_time([DecomposedClass(3, ggeo(0.2, 0.4), 1.0, 1.0, 0.0)])[3])


def test_contention_high_shared_queue_members_wait_alike():
    # 单周期服务: 类2在SB上优先, 服务过程不变, 与类1在q1中对称
    solution = decompose_contention_high((spec(1, 0.2, 0.4), spec(2, 0.2, 0.4)), spec(3, 0.2, 0.4))
    assert solution.modified(2).t_hat == 1.0
    assert solution.waiting(1) == pytest.approx(solution.waiting(2))
    assert solution.waiting(3) > solution.waiting(2)


def test_contention_high_rejects_overloaded_shared_queue():
    with pytest.raises(InstabilityError):
        decompose_contention_high((spec(1, 0.5), spec(2, 0.5)), spec(3, 0.1))
