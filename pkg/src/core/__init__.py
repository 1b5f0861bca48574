"""
NocPerf Core - 核心模块
"""
from .models import (
    ExperimentConfig, TopologyConfig, FlowConfig, TrafficConfig, ServiceConfig,
    SolverConfig, SimulationConfig, SweepConfig, EstimationConfig, LoggingConfig,
    TopologyKind, RoutingName, Arbitration, TrafficPattern, OutputFormat, Structure,
    WindowFlag, PointStatus, Series,
    FlowLatency, QueueWait, ClassResult, NetworkSolution,
    FlowStats, QueueStats, ClassStats, ServerStats, ConditionalOccupancy, SimReport,
    ComparisonRow, SweepRow, WindowEstimate, WindowLatency,
)
from .errors import (
    NocPerfError, ConfigError, DomainError, TraceParseError, InstabilityError,
    ModelBreakdownError, NonConvergenceError, UnclassifiableStructureError,
)
from .events import DiagnosticBus, Diagnostic, DiagnosticType, diagnostic_bus
from .config import load_config, resolved_config, resolve_log_level, setup_logging
from .scheduler import Scheduler, default_jobs

__all__ = [
    # Config models
    "ExperimentConfig", "TopologyConfig", "FlowConfig", "TrafficConfig", "ServiceConfig",
    "SolverConfig", "SimulationConfig", "SweepConfig", "EstimationConfig", "LoggingConfig",
    # Enums
    "TopologyKind", "RoutingName", "Arbitration", "TrafficPattern", "OutputFormat", "Structure",
    "WindowFlag", "PointStatus", "Series",
    # Reports
    "FlowLatency", "QueueWait", "ClassResult", "NetworkSolution",
    "FlowStats", "QueueStats", "ClassStats", "ServerStats", "ConditionalOccupancy", "SimReport",
    "ComparisonRow", "SweepRow", "WindowEstimate", "WindowLatency",
    # Errors
    "NocPerfError", "ConfigError", "DomainError", "TraceParseError", "InstabilityError",
    "ModelBreakdownError", "NonConvergenceError", "UnclassifiableStructureError",
    # Diagnostics
    "DiagnosticBus", "Diagnostic", "DiagnosticType", "diagnostic_bus",
    # Config
    "load_config", "resolved_config", "resolve_log_level", "setup_logging",
    # Scheduler
    "Scheduler", "default_jobs",
]
