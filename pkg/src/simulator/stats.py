"""
NocPerf - 仿真统计累加器
"""
from dataclasses import dataclass


def overlap(start: int, end: int, window_start: int, window_end: int) -> int:
    """区间 [start, end) 与测量窗口的重叠长度"""
    return max(0, min(end, window_end) - max(start, window_start))


@dataclass
class GapMoments:
    """事件间隔的一、二阶矩 (到达/离开过程SCV)"""
    last: int | None = None
    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    def observe(self, cycle: int):
        if self.last is not None:
            gap = cycle - self.last
            self.count += 1
            self.total += gap
            self.total_sq += gap * gap
        self.last = cycle

    def scv(self) -> float | None:
        if self.count < 2 or self.total <= 0:
            return None
        mean = self.total / self.count
        variance = self.total_sq / self.count - mean * mean
        return max(0.0, variance) / (mean * mean)


@dataclass
class WaitAccumulator:
    """等待时间与服务计数"""
    packets: int = 0
    wait_sum: float = 0.0
    busy: int = 0
    area: int = 0                            # 等待 + 服务中的 flit·cycle

    def add_wait(self, wait: int):
        self.packets += 1
        self.wait_sum += wait

    def mean_wait(self) -> float | None:
        if self.packets == 0:
            return None
        return self.wait_sum / self.packets
