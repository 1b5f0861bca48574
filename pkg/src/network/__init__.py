"""
NocPerf Network - 队列网络与迭代分解求解
"""
from .graph import (
    FlowSpec, HopClass, QueueGraph, StructureAnnotation,
    route, uniform_flows, assign_ranks, assemble_graph, build_queue_graph, classify_structures,
    THROUGH_RANK, INJECTION_RANK,
)
from .canonical import canonical_graph, flow_index
from .solver import solve_network, no_burst_baseline

__all__ = [
    # Graph
    "FlowSpec", "HopClass", "QueueGraph", "StructureAnnotation",
    "route", "uniform_flows", "assign_ranks", "assemble_graph", "build_queue_graph",
    "classify_structures", "THROUGH_RANK", "INJECTION_RANK",
    # Canonical
    "canonical_graph", "flow_index",
    # Solver
    "solve_network", "no_burst_baseline",
]
