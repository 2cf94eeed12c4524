"""Scaling laws, workload models, a bus simulator and benchmark-list analysis."""

from parscale.scaling import (
    ParallelizationFraction,
    SystemShape,
    alpha_from_efficiency,
    alpha_from_speedup,
    amdahl_efficiency,
    amdahl_speedup,
    gustafson_efficiency,
    gustafson_speedup,
    gustafson_to_amdahl,
    payload_performance,
)
from parscale.workloads import (
    AnnTopology,
    find_peak,
    message_count,
    performance_curve,
)
from parscale.bussim import simulate

__version__ = "0.1.0"

__all__ = [
    "AnnTopology",
    "ParallelizationFraction",
    "SystemShape",
    "alpha_from_efficiency",
    "alpha_from_speedup",
    "amdahl_efficiency",
    "amdahl_speedup",
    "find_peak",
    "gustafson_efficiency",
    "gustafson_speedup",
    "gustafson_to_amdahl",
    "message_count",
    "payload_performance",
    "performance_curve",
    "simulate",
]
