"""Deterministic MANET routing comparison simulator.

Compares stability-based (FORP), load-balancing (LBR) and power-aware
(MMBCR) on-demand route selection under random waypoint mobility, CBR
traffic and an optional transmission power control mode.
"""

from .config import ScenarioConfig, ConfigError, set1_config, set2_config
from .engine import run, RunResult
from .metrics import MetricsReport, compute_report, aggregate

__all__ = [
    "ScenarioConfig", "ConfigError", "set1_config", "set2_config",
    "run", "RunResult", "MetricsReport", "compute_report", "aggregate",
]
