"""
NocPerf TraceBurst - 注入轨迹与突发估计
"""
from .trace import TraceEvent, TRACE_HEADER, load_trace, write_trace
from .estimator import (
    APPLICATION_BURSTINESS, DEFAULT_WINDOW,
    application_burst_prob, group_windows, estimate_rate, estimate_burstiness,
    virtual_queue_occupancy, invert_occupancy, window_flows, estimate_window_latency,
)

__all__ = [
    # Trace
    "TraceEvent", "TRACE_HEADER", "load_trace", "write_trace",
    # Estimation
    "APPLICATION_BURSTINESS", "DEFAULT_WINDOW",
    "application_burst_prob", "group_windows", "estimate_rate", "estimate_burstiness",
    "virtual_queue_occupancy", "invert_occupancy", "window_flows", "estimate_window_latency",
]
