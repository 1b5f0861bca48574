"""
NocPerf - 核心数据模型
实验配置与结果报表 (pydantic)
"""
from enum import Enum
from pydantic import BaseModel, Field, field_validator, model_validator


class TopologyKind(str, Enum):
    """拓扑类型"""
    RING = "ring"
    MESH = "mesh"


class RoutingName(str, Enum):
    """路由算法"""
    AUTO = "auto"                    # 环: 最短弧, mesh: Y-X
    SHORTEST_ARC = "shortest-arc"    # 双向环最短弧, 平局顺时针
    YX = "yx"                        # 先走Y(行), 再走X(列)
    XY = "xy"                        # 先走X(列), 再走Y(行)


class Arbitration(str, Enum):
    """仲裁方式"""
    PRIORITY = "priority"            # 网内flit优先于注入
    FAIR = "fair"                    # 所有队列同级, 轮询


class TrafficPattern(str, Enum):
    """流量模式"""
    UNIFORM = "uniform"
    EXPLICIT = "explicit"


class OutputFormat(str, Enum):
    """输出格式"""
    CSV = "csv"
    JSON = "json"


class Structure(str, Enum):
    """共享服务器上两个队列之间的结构"""
    BASIC = "basic"
    CONTENTION_LOW = "contention-low"
    CONTENTION_HIGH = "contention-high"
    SHARED = "shared"                # 同级队列, 轮询共享


class WindowFlag(str, Enum):
    """窗口估计标记"""
    OK = "ok"
    NO_BURST = "no_burst"            # 反演得到 C_a^2 < 1 - λ, p_b 记为 0
    UNSTABLE = "unstable"            # 虚拟队列 ρ >= 1
    EMPTY = "empty"                  # 窗口内无事件


class PointStatus(str, Enum):
    """实验点状态"""
    OK = "ok"
    UNSTABLE = "unstable"
    NONCONVERGED = "nonconverged"


class Series(str, Enum):
    """扫描曲线"""
    ANALYTIC = "analytic"
    BASELINE = "baseline"
    SIMULATION = "simulation"


# ============ 配置 ============

class TopologyConfig(BaseModel):
    """拓扑配置"""
    kind: TopologyKind = Field(default=TopologyKind.RING, description="ring 或 mesh")
    size: int = Field(default=6, ge=2, description="环节点数")
    width: int = Field(default=4, ge=2, description="mesh列数")
    height: int = Field(default=4, ge=2, description="mesh行数")

    class Config:
        use_enum_values = True

    @property
    def node_count(self) -> int:
        if self.kind == TopologyKind.RING:
            return self.size
        return self.width * self.height

    @property
    def label(self) -> str:
        if self.kind == TopologyKind.RING:
            return f"ring{self.size}x1"
        return f"mesh{self.width}x{self.height}"


class FlowConfig(BaseModel):
    """显式流"""
    src: int = Field(..., ge=0, description="源节点")
    dst: int = Field(..., ge=0, description="目的节点")
    rate: float = Field(..., gt=0, le=1, description="注入率 (flit/cycle)")
    burst_prob: float = Field(default=0.0, ge=0, lt=1, description="突发概率 p_b")

    @model_validator(mode="after")
    def _distinct_endpoints(self):
        if self.src == self.dst:
            raise ValueError(f"flow source and destination must differ (node {self.src})")
        return self


class TrafficConfig(BaseModel):
    """流量配置"""
    pattern: TrafficPattern = Field(default=TrafficPattern.UNIFORM)
    injection_rate: float = Field(default=0.1, gt=0, le=1, description="每个源的注入率 λ")
    burst_prob: float = Field(default=0.2, ge=0, lt=1, description="突发概率 p_b")
    application: str | None = Field(default=None, description="按应用参考表设置 p_b")
    flows: list[FlowConfig] = Field(default_factory=list)

    class Config:
        use_enum_values = True

    @model_validator(mode="after")
    def _resolve_application(self):
        if self.application is not None:
            from src.core.errors import ConfigError
            from src.traceburst.estimator import application_burst_prob

            try:
                self.burst_prob = application_burst_prob(self.application)
            except ConfigError as e:
                raise ValueError(str(e)) from e
        if self.pattern == TrafficPattern.EXPLICIT and not self.flows:
            raise ValueError("explicit traffic pattern needs at least one flow")
        return self


class ServiceConfig(BaseModel):
    """路由器服务过程"""
    service_time: int = Field(default=1, ge=1, description="每跳服务时间 (cycles)")
    service_scv: float = Field(default=0.0, ge=0, description="服务时间SCV")
    link_latency: int = Field(default=1, ge=0, description="每跳链路延迟 (cycles)")


class SolverConfig(BaseModel):
    """不动点迭代控制"""
    tolerance: float = Field(default=1e-6, gt=0)
    max_iterations: int = Field(default=1000, ge=1)
    damping: float = Field(default=0.5, gt=0, le=1, description="更新阻尼系数")


class SimulationConfig(BaseModel):
    """仿真配置"""
    seed: int = Field(default=1, ge=0)
    warmup: int = Field(default=200_000, ge=0, description="预热周期")
    measure: int = Field(default=2_000_000, gt=0, description="测量周期")
    percentiles: list[float] = Field(default_factory=lambda: [50.0, 95.0, 99.0])

    @field_validator("percentiles")
    @classmethod
    def _check_percentiles(cls, value: list[float]) -> list[float]:
        for p in value:
            if not 0 <= p <= 100:
                raise ValueError(f"percentile {p} outside [0, 100]")
        return value


class SweepConfig(BaseModel):
    """扫描轴, 为空时使用traffic中的单点"""
    injection_rates: list[float] = Field(default_factory=list)
    burst_probs: list[float] = Field(default_factory=list)

    @field_validator("injection_rates")
    @classmethod
    def _check_rates(cls, value: list[float]) -> list[float]:
        for rate in value:
            if not 0 < rate <= 1:
                raise ValueError(f"injection rate {rate} outside (0, 1]")
        return value

    @field_validator("burst_probs")
    @classmethod
    def _check_bursts(cls, value: list[float]) -> list[float]:
        for p in value:
            if not 0 <= p < 1:
                raise ValueError(f"burst probability {p} outside [0, 1)")
        return value


class EstimationConfig(BaseModel):
    """突发估计配置"""
    window: int = Field(default=200_000, ge=1, description="窗口长度 (cycles)")
    per_flow: bool = Field(default=False, description="按流而不是按源估计")


class LoggingConfig(BaseModel):
    """日志配置"""
    level: str = Field(default="WARNING")


class ExperimentConfig(BaseModel):
    """完整实验配置"""
    name: str = Field(default="experiment")
    topology: TopologyConfig = Field(default_factory=TopologyConfig)
    routing: RoutingName = Field(default=RoutingName.AUTO)
    arbitration: Arbitration = Field(default=Arbitration.PRIORITY)
    traffic: TrafficConfig = Field(default_factory=TrafficConfig)
    service: ServiceConfig = Field(default_factory=ServiceConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    sweep: SweepConfig = Field(default_factory=SweepConfig)
    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)

    class Config:
        use_enum_values = True
        extra = "forbid"

    @model_validator(mode="after")
    def _check_consistency(self):
        kind = self.topology.kind
        allowed = {
            TopologyKind.RING: {RoutingName.AUTO, RoutingName.SHORTEST_ARC},
            TopologyKind.MESH: {RoutingName.AUTO, RoutingName.YX, RoutingName.XY},
        }[TopologyKind(kind)]
        if RoutingName(self.routing) not in allowed:
            raise ValueError(f"routing '{self.routing}' is not available on a {kind} topology")

        nodes = self.topology.node_count
        for flow in self.traffic.flows:
            if flow.src >= nodes or flow.dst >= nodes:
                raise ValueError(f"flow {flow.src}->{flow.dst} outside a {nodes}-node topology")
        return self

    def rate_axis(self) -> list[float]:
        return list(self.sweep.injection_rates) or [self.traffic.injection_rate]

    def burst_axis(self) -> list[float]:
        return list(self.sweep.burst_probs) or [self.traffic.burst_prob]


# ============ 解析结果 ============

class FlowLatency(BaseModel):
    """单条流的端到端延迟"""
    flow: int
    source: int
    destination: int
    hops: int
    rate: float
    burst_prob: float
    latency: float
    zero_load: float                         # h (T + L)


class QueueWait(BaseModel):
    """单个队列的平均等待"""
    queue: str
    rank: int
    rate: float
    utilization: float                       # Σ λ T̂
    wait: float                              # λ加权平均


class ClassResult(BaseModel):
    """(流, 跳) 类的分解结果"""
    flow: int
    hop: int
    queue: str
    server: str
    rank: int
    rate: float
    arrival_scv: float
    wait: float
    t_hat: float
    scv_hat: float


class NetworkSolution(BaseModel):
    """网络求解结果"""
    flows: list[FlowLatency] = Field(default_factory=list)
    queues: list[QueueWait] = Field(default_factory=list)
    classes: list[ClassResult] = Field(default_factory=list)
    mean_latency: float = 0.0                # 按流量加权
    iterations: int = 0
    residual: float = 0.0
    diagnostics: dict[str, int] = Field(default_factory=dict)

    def flow_latency(self, flow: int) -> float:
        return self.flows[flow].latency

    def queue_wait(self, queue: str) -> float:
        for q in self.queues:
            if q.queue == queue:
                return q.wait
        raise KeyError(queue)

    def class_wait(self, flow: int, hop: int) -> float:
        for c in self.classes:
            if c.flow == flow and c.hop == hop:
                return c.wait
        raise KeyError((flow, hop))


# ============ 仿真结果 ============

class FlowStats(BaseModel):
    """单条流的仿真统计"""
    flow: int
    source: int
    destination: int
    hops: int
    rate: float
    packets: int
    mean_latency: float | None = None
    percentiles: dict[str, float] = Field(default_factory=dict)


class QueueStats(BaseModel):
    """单个队列的仿真统计"""
    queue: str
    offered_load: float
    packets: int
    mean_wait: float | None = None
    mean_occupancy: float = 0.0              # 等待 + 服务中
    utilization: float = 0.0


class ClassStats(BaseModel):
    """(流, 跳) 类的仿真统计"""
    flow: int
    hop: int
    queue: str
    server: str
    packets: int
    mean_wait: float | None = None
    interarrival_scv: float | None = None
    interdeparture_scv: float | None = None


class ServerStats(BaseModel):
    """服务器统计"""
    server: str
    offered_load: float
    utilization: float


class ConditionalOccupancy(BaseModel):
    """类 k 在服务时类 m 的平均排队长度"""
    server: str
    waiting_class: str
    serving_class: str
    value: float                             # 只在 k 服务的周期采样
    joint: float = 0.0                       # E[n_m · 1{k 在服务}]


class SimReport(BaseModel):
    """仿真报告"""
    warmup: int
    measure: int
    seed: int
    flows: list[FlowStats] = Field(default_factory=list)
    queues: list[QueueStats] = Field(default_factory=list)
    classes: list[ClassStats] = Field(default_factory=list)
    servers: list[ServerStats] = Field(default_factory=list)
    injected: int = 0
    delivered: int = 0
    in_flight: int = 0
    mean_latency: float | None = None
    saturated: bool = False
    conditional: list[ConditionalOccupancy] = Field(default_factory=list)
    diagnostics: dict[str, int] = Field(default_factory=dict)

    def queue_stats(self, queue: str) -> QueueStats:
        for q in self.queues:
            if q.queue == queue:
                return q
        raise KeyError(queue)

    def class_stats(self, flow: int, hop: int) -> ClassStats:
        for c in self.classes:
            if c.flow == flow and c.hop == hop:
                return c
        raise KeyError((flow, hop))


# ============ 实验报表 ============

class ComparisonRow(BaseModel):
    """解析模型 vs 仿真 vs 无突发基线"""
    topology: str
    burst_prob: float
    injection_rate: float
    analytic: float | None = None
    simulated: float | None = None
    error_pct: float | None = None           # |a - s| / s * 100
    baseline: float | None = None
    baseline_error_pct: float | None = None  # (b - s) / s * 100, 负值为低估
    status: PointStatus = PointStatus.OK

    class Config:
        use_enum_values = True


class SweepRow(BaseModel):
    """长格式扫描结果"""
    topology: str
    burst_prob: float
    injection_rate: float
    series: Series
    latency: float | None = None
    status: PointStatus = PointStatus.OK

    class Config:
        use_enum_values = True


class WindowEstimate(BaseModel):
    """单窗口的注入率/突发估计"""
    window: int
    start: int
    length: int
    source: int
    destination: int | None = None           # 按流估计时填写
    events: int
    rate: float
    occupancy: float
    arrival_scv: float | None = None
    burst_prob: float | None = None
    flag: WindowFlag = WindowFlag.OK

    class Config:
        use_enum_values = True


class WindowLatency(BaseModel):
    """窗口化估计循环中每个窗口的网络延迟"""
    window: int
    flows: int
    mean_latency: float | None = None
    status: PointStatus = PointStatus.OK

    class Config:
        use_enum_values = True
