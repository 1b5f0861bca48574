"""
NocPerf - GGeo流量模型
(λ, p_b) 与矩形式的转换、到达序列采样、分流与离开过程的矩变换
"""
from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import DomainError
from .events import emit_moment_clamped

logger = logging.getLogger(__name__)

# 浮点误差容限
_EPS = 1e-12


# ============ 矩 ============

@dataclass(frozen=True)
class MomentPair:
    """流的一、二阶矩: 速率与到达间隔SCV"""
    rate: float
    scv: float

    def __post_init__(self):
        if self.rate < 0:
            raise DomainError(f"stream rate must be >= 0, got {self.rate}")
        if self.scv < 0:
            raise DomainError(f"stream scv must be >= 0, got {self.scv}")

    @property
    def is_null(self) -> bool:
        return self.rate == 0


def null_stream() -> MomentPair:
    """速率为0的空流, 下游忽略其SCV"""
    return MomentPair(0.0, 0.0)


def _check_rate(rate: float):
    if not 0 < rate <= 1:
        raise DomainError(f"rate must lie in (0, 1], got {rate}")


def _check_burst_prob(burst_prob: float):
    if not 0 <= burst_prob < 1:
        raise DomainError(f"burst probability must lie in [0, 1), got {burst_prob}")


def scv_from_burst(rate: float, burst_prob: float) -> float:
    """C_a^2 = 2/(1 - p_b) - λ - 1"""
    _check_rate(rate)
    _check_burst_prob(burst_prob)
    return 2.0 / (1.0 - burst_prob) - rate - 1.0


def burst_from_scv(rate: float, scv: float) -> float:
    """scv_from_burst 的逆: p_b = 1 - 2/(C_a^2 + λ + 1)"""
    _check_rate(rate)
    if scv < 1.0 - rate - _EPS:
        raise DomainError(
            f"scv {scv} below the GGeo floor 1 - rate = {1.0 - rate} (not representable)"
        )
    return max(0.0, 1.0 - 2.0 / (scv + rate + 1.0))


def burst_factor(rate: float, scv: float) -> float:
    """β = (C_a^2 + λ - 1)/2, 每次到达的平均额外批量"""
    if rate == 0:
        return 0.0
    _check_rate(rate)
    if scv < 1.0 - rate - _EPS:
        raise DomainError(f"(rate={rate}, scv={scv}) is not a GGeo moment pair")
    return max(0.0, (scv + rate - 1.0) / 2.0)


@dataclass(frozen=True)
class GGeoProcess:
    """GGeo离散时间到达过程"""
    rate: float
    burst_prob: float = 0.0
    scv: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "scv", scv_from_burst(self.rate, self.burst_prob))

    @property
    def beta(self) -> float:
        return self.burst_prob / (1.0 - self.burst_prob)

    @property
    def firing_prob(self) -> float:
        """Geo分支每个slot的触发概率 σ = λ(1 - p_b)"""
        return self.rate * (1.0 - self.burst_prob)

    def moments(self) -> MomentPair:
        return MomentPair(self.rate, self.scv)

    def without_burst(self) -> "GGeoProcess":
        return GGeoProcess(self.rate, 0.0)

    @classmethod
    def from_moments(cls, pair: MomentPair) -> "GGeoProcess":
        return cls(pair.rate, burst_from_scv(pair.rate, pair.scv))


# ============ 采样 ============

def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """为每条流派生独立的随机种子"""
    return np.random.SeedSequence(seed).spawn(count)


class GGeoSampler:
    """
    GGeo到达间隔采样器

    间隔以概率 p_b 为0 (同slot批量到达), 否则服从参数 σ = λ(1 - p_b) 的几何分布 (>= 1).
    单一所有者, 不在线程间共享.
    """

    block_size = 4096

    def __init__(self, process: GGeoProcess, seed: int | np.random.SeedSequence):
        self.process = process
        self._rng = np.random.default_rng(seed)
        self._buffer: list[int] = []
        self._cursor = 0

    def gaps(self, count: int) -> np.ndarray:
        """采样 count 个到达间隔"""
        if count < 1:
            raise DomainError(f"sample count must be >= 1, got {count}")
        bulk = self._rng.random(count) < self.process.burst_prob
        geometric = self._rng.geometric(self.process.firing_prob, size=count)
        return np.where(bulk, 0, geometric).astype(np.int64)

    def next_gap(self) -> int:
        """逐个取间隔 (仿真器使用, 按块缓存)"""
        if self._cursor >= len(self._buffer):
            self._buffer = self.gaps(self.block_size).tolist()
            self._cursor = 0
        gap = self._buffer[self._cursor]
        self._cursor += 1
        return gap

    def arrival_cycles(self, start: int, count: int) -> np.ndarray:
        """从 start 开始的 count 个到达时刻"""
        return start + np.cumsum(self.gaps(count))


def sample_interarrivals(process: GGeoProcess, seed: int, count: int) -> np.ndarray:
    """给定种子的确定性到达间隔序列"""
    return GGeoSampler(process, seed).gaps(count)


# ============ 矩变换 ============

def split_stream(stream: MomentPair, keep_prob: float) -> MomentPair:
    """Bernoulli分流: λ' = qλ, C'^2 = q C^2 + 1 - q"""
    if not 0 <= keep_prob <= 1:
        raise DomainError(f"keep probability must lie in [0, 1], got {keep_prob}")
    if keep_prob == 0 or stream.is_null:
        return null_stream()
    return MomentPair(keep_prob * stream.rate, keep_prob * stream.scv + 1.0 - keep_prob)


def departure_scv(utilization: float, arrival_scv: float, service_scv: float) -> float:
    """C_d^2 = (1 - ρ^2) C_a^2 + ρ^2 C_s^2"""
    if not 0 <= utilization < 1:
        raise DomainError(f"departure_scv needs utilization in [0, 1), got {utilization}")
    rho2 = utilization * utilization
    return (1.0 - rho2) * arrival_scv + rho2 * service_scv


def flow_departure(
    arrival: MomentPair,
    queue_util: float,
    service_scv: float,
    share: float,
) -> MomentPair:
    """
    一个类离开共享FIFO队列后的矩

    等价于先对整个队列做 departure_scv, 再以 share (类速率/队列速率) 分流:
    q[(1-ρ^2)C_a,q^2 + ρ^2 C_s^2] + 1 - q = (1-ρ^2)C_a,m^2 + ρ^2 (q C_s^2 + 1 - q),
    其中类的到达流视为队列总到达流的Bernoulli分流, 因此无需合流公式.
    结果不低于GGeo下限 1 - λ.
    """
    if arrival.is_null:
        return null_stream()
    thinned = split_stream(MomentPair(1.0, service_scv), share)
    scv = departure_scv(queue_util, arrival.scv, thinned.scv)
    floor = 1.0 - arrival.rate
    if scv < floor:
        emit_moment_clamped(arrival.rate, scv, floor)
        scv = floor
    return MomentPair(arrival.rate, scv)


def flow_departure_scv(
    arrival_scv: np.ndarray,
    queue_util: np.ndarray,
    service_scv: np.ndarray,
    share: np.ndarray,
) -> np.ndarray:
    """flow_departure 的数组形式, 不做下限截断"""
    rho2 = np.square(queue_util)
    thinned = share * service_scv + 1.0 - share
    return (1.0 - rho2) * arrival_scv + rho2 * thinned


def train_continuation(load, scv):
    """
    串行化流 (每个服务周期至多一个flit) 的续发概率 a = P(下个周期仍有flit | 本周期有flit)

    用两状态Markov开关过程拟合 (负载 r, 间隔SCV):
    c = (1 - r)/r, b = 2c / (C^2/r^2 + c + c^2), a = 1 - c·b.
    独立Bernoulli流 (C^2 = 1 - r) 时 a = r. 接受标量或numpy数组.
    """
    r = np.clip(np.asarray(load, dtype=float), _EPS, 1.0 - _EPS)
    c = (1.0 - r) / r
    b = np.minimum(1.0, 2.0 * c / (np.asarray(scv, dtype=float) / (r * r) + c + c * c))
    a = np.clip(1.0 - c * b, 0.0, 1.0 - 1e-9)
    return float(a) if a.ndim == 0 else a


def mixture_service_scv(weights: list[float], times: list[float], scvs: list[float]) -> float:
    """按速率加权混合多个类的服务时间, 返回混合后的SCV"""
    total = sum(weights)
    if total <= 0:
        return 0.0
    mean = sum(w * t for w, t in zip(weights, times)) / total
    second = sum(w * t * t * (1.0 + c) for w, t, c in zip(weights, times, scvs)) / total
    return max(0.0, second / (mean * mean) - 1.0)
