"""
NocPerf Simulator - 周期精确仿真
"""
from .engine import (
    SimConfig, CanonicalParams, PacketRecord, SimEngine,
    run_simulation, run_canonical, simulate_graph, measure_conditional_occupancy,
)

__all__ = [
    "SimConfig", "CanonicalParams", "PacketRecord", "SimEngine",
    "run_simulation", "run_canonical", "simulate_graph", "measure_conditional_occupancy",
]
