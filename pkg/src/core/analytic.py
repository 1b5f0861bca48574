"""
NocPerf - 优先级队列的最大熵分解

把共享服务器上的多类非抢占优先级系统拆成若干独立的 queue-node.
同一队列中去往同一服务器的类组成一个 queue-node, 共用修正后的服务过程 (T̂, Ĉ_s^2),
再按物理FIFO队列计算各类的平均等待时间.
"""
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Mapping, Sequence
import logging

import numpy as np

from .errors import DomainError, InstabilityError, ModelBreakdownError, NonConvergenceError
from .events import emit_load_clamped, emit_p_zero_clamped, emit_scv_floored, emit_wait_floored
from .models import SolverConfig
from .traffic import MomentPair, burst_factor, flow_departure, mixture_service_scv, train_continuation

logger = logging.getLogger(__name__)

# p_m(0) 截断下限
P_ZERO_FLOOR = 1e-9

# 原始负载 < 1 但分解后负载 ρ̂ 达到饱和时的截断上限
UTIL_HAT_CEILING = 0.995

# 浮点噪声范围内的负值直接置0, 不计诊断
_NOISE = 1e-9


# ============ 数据类型 ============

@dataclass(frozen=True)
class TrafficClassSpec:
    """共享服务器上的一个流量类"""
    class_id: Hashable
    arrival: MomentPair
    service_time: float = 1.0
    service_scv: float = 0.0
    priority_rank: int = 0                   # 越小优先级越高
    queue_id: Hashable | None = None         # None: 同rank的类共享一个逻辑队列
    serialized: bool = False                 # 经上游服务器串行化: 每个slot至多一个flit

    def __post_init__(self):
        if self.service_time < 1:
            raise DomainError(f"class {self.class_id}: service time must be >= 1 cycle")
        if self.service_scv < 0:
            raise DomainError(f"class {self.class_id}: service scv must be >= 0")
        if self.utilization >= 1:
            raise InstabilityError(str(self.class_id), self.utilization)
        if not self.serialized:
            # GGeo可表示性检查
            burst_factor(self.arrival.rate, self.arrival.scv)

    @property
    def utilization(self) -> float:
        return self.arrival.rate * self.service_time

    @property
    def queue_key(self) -> Hashable:
        if self.queue_id is not None:
            return self.queue_id
        return ("rank", self.priority_rank)

    @property
    def beta(self) -> float:
        if self.serialized:
            return 0.0
        return burst_factor(self.arrival.rate, self.arrival.scv)

    @property
    def continuation(self) -> float:
        """本服务周期有本类flit时, 下一服务周期仍有的概率; 批量到达的流各slot独立, 取 ρ"""
        if self.serialized and self.arrival.rate > 0:
            return train_continuation(self.utilization, self.arrival.scv)
        return self.utilization

    @property
    def residual(self) -> float:
        """非抢占服务的剩余时间因子 ½(T - 1 + T C_s^2)"""
        return 0.5 * (self.service_time - 1.0 + self.service_time * self.service_scv)


@dataclass(frozen=True)
class QueueNode:
    """同一队列中去往同一服务器的类, 整体分解"""
    key: Hashable
    members: tuple[TrafficClassSpec, ...]

    @property
    def rank(self) -> int:
        return self.members[0].priority_rank

    @property
    def rate(self) -> float:
        return sum(c.arrival.rate for c in self.members)

    @property
    def utilization(self) -> float:
        return sum(c.utilization for c in self.members)

    @property
    def service_time(self) -> float:
        rate = self.rate
        if rate == 0:
            return self.members[0].service_time
        return sum(c.arrival.rate * c.service_time for c in self.members) / rate

    @property
    def residual(self) -> float:
        load = self.utilization
        if load == 0:
            return self.members[0].residual
        return sum(c.utilization * c.residual for c in self.members) / load

    @property
    def self_work(self) -> float:
        """flit到达时同slot排在它前面的本节点工作量 (按速率平均)"""
        rate = self.rate
        if rate == 0:
            return 0.0
        coincident = sum(c.utilization for c in self.members if not c.serialized)
        total = 0.0
        for c in self.members:
            ahead = c.service_time * c.beta
            if not c.serialized:
                ahead += 0.5 * (coincident - c.utilization)
            total += c.arrival.rate * ahead
        return total / rate

    @property
    def arrival_scv(self) -> float:
        """与 self_work 一致的等效到达SCV: 1 - λ + 2 s / T"""
        return 1.0 - self.rate + 2.0 * self.self_work / self.service_time

    @property
    def run_load(self) -> float:
        return sum(c.utilization * c.continuation for c in self.members)

    @property
    def square_load(self) -> float:
        return sum(c.utilization ** 2 for c in self.members)


@dataclass(frozen=True)
class PriorityGroup:
    """共享一个服务器的类集合"""
    classes: tuple[TrafficClassSpec, ...]
    name: str = "server"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise DomainError(f"priority group {self.name} has no classes")
        ids = [c.class_id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise DomainError(f"priority group {self.name} has duplicate class ids")
        load = self.total_utilization
        if load >= 1:
            raise InstabilityError(self.name, load)
        self.nodes()

    @property
    def total_utilization(self) -> float:
        return sum(c.utilization for c in self.classes)

    def queue_keys(self) -> list[Hashable]:
        keys = []
        for c in self.classes:
            if c.queue_key not in keys:
                keys.append(c.queue_key)
        return keys

    def nodes(self) -> list[QueueNode]:
        nodes = []
        for key in self.queue_keys():
            members = tuple(c for c in self.classes if c.queue_key == key)
            if len({c.priority_rank for c in members}) > 1:
                raise DomainError(f"queue {key} in {self.name} mixes priority ranks")
            nodes.append(QueueNode(key, members))
        return nodes


@dataclass(frozen=True)
class ModifiedService:
    """分解后的服务过程"""
    t_hat: float
    scv_hat: float
    util_hat: float
    p_zero: float
    occupancy: float

    @classmethod
    def identity(cls, spec: TrafficClassSpec, occupancy: float = 0.0) -> "ModifiedService":
        rho = spec.utilization
        return cls(spec.service_time, spec.service_scv, rho, 1.0 - rho, occupancy)


@dataclass(frozen=True)
class ClassSolution:
    class_id: Hashable
    waiting: float
    occupancy: float
    modified: ModifiedService


@dataclass(frozen=True)
class QueueSolution:
    """一个优先级结构的分解结果, cross_occupancy 以 (queue-node, queue-node) 为键"""
    classes: dict[Hashable, ClassSolution]
    residual: float
    cross_occupancy: dict[tuple[Hashable, Hashable], float] = field(default_factory=dict)
    iterations: int = 0
    shared_waits: dict[Hashable, float] = field(default_factory=dict)

    def __getitem__(self, class_id: Hashable) -> ClassSolution:
        return self.classes[class_id]

    def waiting(self, class_id: Hashable) -> float:
        return self.classes[class_id].waiting

    def modified(self, class_id: Hashable) -> ModifiedService:
        return self.classes[class_id].modified


@dataclass(frozen=True)
class DecomposedClass:
    """waiting_time 的输入: 原始 T 与修正后的 (T̂, Ĉ_s^2)"""
    class_id: Hashable
    arrival: MomentPair
    service_time: float
    t_hat: float
    scv_hat: float
    serialized: bool = False

    @property
    def util_hat(self) -> float:
        return self.arrival.rate * self.t_hat

    @property
    def beta(self) -> float:
        if self.serialized:
            return 0.0
        return burst_factor(self.arrival.rate, self.arrival.scv)

    @classmethod
    def from_spec(
        cls, spec: TrafficClassSpec, modified: ModifiedService | None = None
    ) -> "DecomposedClass":
        if modified is None:
            return cls(spec.class_id, spec.arrival, spec.service_time,
                       spec.service_time, spec.service_scv, spec.serialized)
        return cls(spec.class_id, spec.arrival, spec.service_time,
                   modified.t_hat, modified.scv_hat, spec.serialized)


# ============ 闭式核函数 ============

def ggeo_g1_occupancy(utilization: float, arrival_scv: float, service_scv: float) -> float:
    """GGeo/G/1 平均队长 n̄ = ρ(1 - ρ + C_a^2 + ρ C_s^2) / (2(1 - ρ))"""
    if utilization >= 1:
        raise InstabilityError("queue", utilization)
    if utilization < 0:
        raise DomainError(f"utilization must be >= 0, got {utilization}")
    rho = utilization
    return rho * (1.0 - rho + arrival_scv + rho * service_scv) / (2.0 * (1.0 - rho))


def p_zero(
    own_util: float,
    others: Iterable[tuple[float, float]],
    *,
    strict: bool = False,
    class_id: Hashable = None,
) -> float:
    """
    queue-node m 的空闲概率

    p_m(0) = 1 - ρ_m - Σ_k ρ_k · n̄_mk / (ρ_k + n̄_mk)

    结果 <= 0 时: strict 模式抛出 ModelBreakdownError, 否则截断并记诊断.
    """
    value = 1.0 - own_util
    for rho_k, n_mk in others:
        if rho_k >= 1:
            raise InstabilityError(str(class_id), rho_k)
        if rho_k < 0 or n_mk < 0:
            raise DomainError("utilizations and cross-occupancies must be >= 0")
        if rho_k + n_mk > 0:
            value -= rho_k * n_mk / (rho_k + n_mk)

    if value <= 0:
        if strict:
            raise ModelBreakdownError(
                f"class {class_id}: empty probability {value:.4g} <= 0 (decomposition breaks down)"
            )
        emit_p_zero_clamped(class_id, value)
        return P_ZERO_FLOOR
    return min(value, 1.0)


def modified_service_time(rate: float, p_zero: float) -> float:
    """Little: T̂ = (1 - p(0)) / λ"""
    if rate <= 0:
        raise DomainError(f"modified service time needs rate > 0, got {rate}")
    if not 0 < p_zero <= 1:
        raise DomainError(f"empty probability must lie in (0, 1], got {p_zero}")
    t_hat = (1.0 - p_zero) / rate
    if t_hat * rate >= 1:
        raise InstabilityError("queue-node", t_hat * rate)
    return t_hat


def modified_service_scv(
    util_hat: float,
    occupancy: float,
    arrival_scv: float,
    *,
    class_id: Hashable = None,
) -> float:
    """Ĉ_s^2 = ((1 - ρ̂)(2n̄ - ρ̂) - ρ̂ C_a^2) / ρ̂^2, 负值截断为0并记诊断"""
    if not 0 < util_hat < 1:
        raise DomainError(f"modified utilization must lie in (0, 1), got {util_hat}")
    rho = util_hat
    value = ((1.0 - rho) * (2.0 * occupancy - rho) - rho * arrival_scv) / (rho * rho)
    if value < 0:
        if value < -_NOISE:
            emit_scv_floored(class_id, value)
        return 0.0
    return value


def cross_occupancy(rate: float, wait: float, other_util: float) -> float:
    """n̄_mk = ρ_k · λ_m · W_m, W_m 为 m 暴露于 k 的时间"""
    if rate < 0 or wait < 0 or other_util < 0:
        raise DomainError("cross occupancy inputs must be >= 0")
    if other_util >= 1:
        raise InstabilityError("queue", other_util)
    return other_util * rate * wait


def run_factor(high_load, run_load, square_load):
    """
    高优先级流成串到达时阻塞的放大倍数 τ = (1 - ρ_H) / (1 - a_H)

    a_H = (Σ ρ_f a_f - Σ ρ_f^2) / ρ_H + ρ_H 是高优先级流的续发概率.
    各slot独立到达时 Σ ρ_f a_f = Σ ρ_f^2, a_H = ρ_H, τ = 1. 接受标量或numpy数组.
    """
    high = np.asarray(high_load, dtype=float)
    safe = np.where(high > 0, high, 1.0)
    run = (np.asarray(run_load, dtype=float) - np.asarray(square_load, dtype=float)) / safe + high
    run = np.clip(run, 0.0, 1.0 - 1e-9)
    tau = np.where(high > 0, (1.0 - high) / (1.0 - run), 1.0)
    return float(tau) if tau.ndim == 0 else tau


def waiting_time(
    classes: Sequence[DecomposedClass],
    *,
    queue: str = "queue",
    strict: bool = False,
) -> dict[Hashable, float]:
    """
    FIFO队列内各类的平均等待时间

    W_m = (R + Σ_k ρ̂_k T̂_k β_k + ½ C) / (1 - Σ_k ρ̂_k) + A_m + T̂_m (β_m + 1) - T_m
    R = Σ_k ½ ρ̂_k (T̂_k - 1 + T̂_k Ĉ_k^2)
    C = (Σ_i ρ̂_i)^2 - Σ_i ρ̂_i^2, A_m = ½ (Σ_i ρ̂_i - ρ̂_m), i 取互相独立到达的类;
    C 为不同类同slot到达的工作量, A_m 为同slot随机排在 m 前面的其他类工作量.
    串行化的类不与其他类同slot到达, 不计入 C 与 A.
    """
    offered = sum(c.arrival.rate * c.service_time for c in classes)
    if offered >= 1:
        raise InstabilityError(queue, offered)

    load = sum(c.util_hat for c in classes)
    if load >= UTIL_HAT_CEILING:
        if strict:
            raise ModelBreakdownError(
                f"queue {queue}: decomposed load {load:.4f} saturates (offered {offered:.4f})"
            )
        emit_load_clamped(queue, load)
        load = UTIL_HAT_CEILING

    residual = sum(0.5 * c.util_hat * (c.t_hat - 1.0 + c.t_hat * c.scv_hat) for c in classes)
    bulk = sum(c.util_hat * c.t_hat * c.beta for c in classes)
    coincident = sum(c.util_hat for c in classes if not c.serialized)
    squares = sum(c.util_hat ** 2 for c in classes if not c.serialized)
    base = (residual + bulk + 0.5 * (coincident * coincident - squares)) / (1.0 - load)

    waits = {}
    for c in classes:
        ahead = 0.0 if c.serialized else 0.5 * (coincident - c.util_hat)
        wait = base + ahead + c.t_hat * (c.beta + 1.0) - c.service_time
        if wait < 0:
            if wait < -_NOISE:
                emit_wait_floored(c.class_id, wait)
            wait = 0.0
        waits[c.class_id] = wait
    return waits


# ============ 共享服务器均值分析 ============

def shared_server_waits(
    group: PriorityGroup,
    settings: SolverConfig | None = None,
    *,
    initial: Mapping[Hashable, float] | None = None,
) -> tuple[dict[Hashable, float], int]:
    """
    未分解的共享服务器上各 queue-node 的平均等待 (离散时间, 先到达后服务)

    W_x (1 - ρ_H - ρ_x) = R + s_x + τ_x ρ_H + ½ ρ_E + Σ_{H∪E} ρ_k W_k
    H: 优先级更高的 queue-node, E: 同级的其他 queue-node, s_x: 同slot排在前面的本节点工作量,
    τ_x: 高优先级流成串到达的放大倍数 (run_factor).
    阻尼Jacobi迭代, 返回 (每个类所在 queue-node 的等待时间, 迭代次数).
    """
    settings = settings or SolverConfig()
    nodes = group.nodes()
    n = len(nodes)

    rho = np.array([node.utilization for node in nodes])
    rank = np.array([node.rank for node in nodes])
    self_work = np.array([node.self_work for node in nodes])
    run_load = np.array([node.run_load for node in nodes])
    square_load = np.array([node.square_load for node in nodes])

    distinct = ~np.eye(n, dtype=bool)
    higher = distinct & (rank[None, :] < rank[:, None])
    equal = distinct & (rank[None, :] == rank[:, None])

    residual = float(sum(c.utilization * c.residual for c in group.classes))
    sigma_high = higher @ rho
    sigma_equal = equal @ rho
    tau = run_factor(sigma_high, higher @ run_load, higher @ square_load)
    constant = residual + self_work + tau * sigma_high + 0.5 * sigma_equal
    coupling = (higher | equal) * rho[None, :]
    diagonal = 1.0 - sigma_high - rho

    if initial is not None:
        w = np.array([float(initial.get(node.members[0].class_id, 0.0)) for node in nodes])
    else:
        w = np.zeros(n)

    def per_class(values: np.ndarray) -> dict[Hashable, float]:
        return {c.class_id: float(values[i]) for i, node in enumerate(nodes) for c in node.members}

    residual_norm = float("inf")
    for iteration in range(1, settings.max_iterations + 1):
        target = (constant + coupling @ w) / diagonal
        delta = target - w
        residual_norm = float(np.max(np.abs(delta) / np.maximum(1.0, np.abs(target))))
        w = w + settings.damping * delta
        if residual_norm <= settings.tolerance:
            return per_class(target), iteration

    raise NonConvergenceError(
        "shared-server wait iteration did not converge",
        iterations=settings.max_iterations,
        residual=residual_norm,
        queue=group.name,
        last_iterate=per_class(w),
    )


# ============ 分解 ============

def _exposure(m: QueueNode, k: QueueNode, wait: float) -> float:
    """queue-node m 暴露于 k 占用服务器的时间"""
    if k.rank < m.rank:
        return wait + m.service_time
    if k.rank == m.rank:
        return wait
    return k.residual


def decompose_basic_priority(
    group: PriorityGroup,
    settings: SolverConfig | None = None,
    *,
    strict: bool = False,
    initial_waits: Mapping[Hashable, float] | None = None,
) -> QueueSolution:
    """基本优先级结构的分解: 每个 queue-node 得到独立的服务过程, 再按FIFO计算各类等待"""
    nodes = group.nodes()
    mva, iterations = shared_server_waits(group, settings, initial=initial_waits)

    modified: dict[Hashable, ModifiedService] = {}
    cross: dict[tuple[Hashable, Hashable], float] = {}
    for node in nodes:
        if node.rate == 0:
            for c in node.members:
                modified[c.class_id] = ModifiedService.identity(c)
            continue

        wait = mva[node.members[0].class_id]
        others = []
        for other in nodes:
            if other.key == node.key:
                continue
            n_mk = cross_occupancy(node.rate, _exposure(node, other, wait), other.utilization)
            cross[(node.key, other.key)] = n_mk
            others.append((other.utilization, n_mk))

        occupancy = node.rate * (wait + node.service_time)
        if sum(n_mk for _, n_mk in others) == 0:
            for c in node.members:
                modified[c.class_id] = ModifiedService.identity(c, occupancy)
            continue

        p0 = p_zero(node.utilization, others, strict=strict, class_id=node.key)
        t_hat = modified_service_time(node.rate, p0)
        util_hat = node.rate * t_hat
        scv_hat = modified_service_scv(util_hat, occupancy, node.arrival_scv, class_id=node.key)
        service = ModifiedService(t_hat, scv_hat, util_hat, p0, occupancy)
        for c in node.members:
            modified[c.class_id] = service

    waits: dict[Hashable, float] = {}
    for node in nodes:
        members = [DecomposedClass.from_spec(c, modified[c.class_id]) for c in node.members]
        waits.update(waiting_time(members, queue=f"{group.name}/{node.key}", strict=strict))

    logger.debug(f"Decomposed {group.name}: {len(nodes)} queue-nodes, {iterations} iterations")
    return _assemble(group.classes, waits, modified, cross, iterations, mva)


def _assemble(
    classes: Iterable[TrafficClassSpec],
    waits: Mapping[Hashable, float],
    modified: Mapping[Hashable, ModifiedService],
    cross: dict[tuple[Hashable, Hashable], float],
    iterations: int,
    shared_waits: Mapping[Hashable, float] | None = None,
) -> QueueSolution:
    solutions = {}
    residual = 0.0
    for c in classes:
        mod = modified[c.class_id]
        wait = waits[c.class_id]
        solutions[c.class_id] = ClassSolution(
            c.class_id, wait, c.arrival.rate * (wait + c.service_time), mod
        )
        residual += 0.5 * c.arrival.rate * mod.t_hat * (mod.t_hat - 1.0 + mod.t_hat * mod.scv_hat)
    return QueueSolution(solutions, residual, cross, iterations, dict(shared_waits or {}))


def decompose_contention_low(
    high: TrafficClassSpec,
    shared_queue: tuple[TrafficClassSpec, TrafficClassSpec],
    settings: SolverConfig | None = None,
    *,
    strict: bool = False,
) -> QueueSolution:
    """
    低优先级侧竞争: 类2和类3共享q2, 只有类2在S_A与类1竞争

    先去掉类3, 对 {1, 2} 做基本分解; 再在q2上对 {2 (修正), 3 (原始)} 计算FIFO等待.
    """
    contender, bystander = shared_queue
    first = replace(high, priority_rank=0, queue_id="q1")
    second = replace(contender, priority_rank=1, queue_id="q2")
    inner = decompose_basic_priority(
        PriorityGroup((first, second), name="S_A"), settings, strict=strict
    )

    modified = {
        high.class_id: inner.modified(high.class_id),
        contender.class_id: inner.modified(contender.class_id),
        bystander.class_id: ModifiedService.identity(bystander),
    }
    q2 = [
        DecomposedClass.from_spec(contender, modified[contender.class_id]),
        DecomposedClass.from_spec(bystander),
    ]
    waits = {high.class_id: inner.waiting(high.class_id)}
    waits.update(waiting_time(q2, queue="q2", strict=strict))
    return _assemble((high, contender, bystander), waits, modified,
                     dict(inner.cross_occupancy), inner.iterations, inner.shared_waits)


def decompose_contention_high(
    shared_high_queue: tuple[TrafficClassSpec, TrafficClassSpec],
    low: TrafficClassSpec,
    settings: SolverConfig | None = None,
    *,
    strict: bool = False,
) -> QueueSolution:
    """
    高优先级侧竞争: 类1和类2共享q1, 只有类2在S_B上优先于类3

    类2离开q1的流 (已被q1串行化) 送入虚拟队列 q_v, 与q3构成基本优先级结构;
    q1 上再对 {1 (原始), 2 (修正)} 计算FIFO等待.
    """
    bystander, contender = shared_high_queue
    queue_rate = bystander.arrival.rate + contender.arrival.rate
    queue_util = bystander.utilization + contender.utilization
    if queue_util >= 1:
        raise InstabilityError("q1", queue_util)

    service_scv = mixture_service_scv(
        [bystander.arrival.rate, contender.arrival.rate],
        [bystander.service_time, contender.service_time],
        [bystander.service_scv, contender.service_scv],
    )
    share = contender.arrival.rate / queue_rate if queue_rate > 0 else 0.0
    departure = flow_departure(contender.arrival, queue_util, service_scv, share)

    virtual = replace(contender, arrival=departure, priority_rank=0, queue_id="q_v", serialized=True)
    third = replace(low, priority_rank=1, queue_id="q3")
    inner = decompose_basic_priority(
        PriorityGroup((virtual, third), name="S_B"), settings, strict=strict
    )

    modified = {
        bystander.class_id: ModifiedService.identity(bystander),
        contender.class_id: inner.modified(contender.class_id),
        low.class_id: inner.modified(low.class_id),
    }
    q1 = [
        DecomposedClass.from_spec(bystander),
        DecomposedClass.from_spec(contender, modified[contender.class_id]),
    ]
    waits = waiting_time(q1, queue="q1", strict=strict)
    waits[low.class_id] = inner.waiting(low.class_id)
    return _assemble((bystander, contender, low), waits, modified,
                     dict(inner.cross_occupancy), inner.iterations, inner.shared_waits)