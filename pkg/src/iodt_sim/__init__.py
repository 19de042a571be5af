"""Simulation of a blockchain-secured drone network: clustering, ledger, storage and attacks."""

from .config import AttackKind, AttackScenario, Consensus, CostModel, EnergyParams, Protocol, SimConfig
from .sim import Engine, RoundMetrics, RunResult, compare, run

__version__ = "0.1.0"

__all__ = [
    "AttackKind",
    "AttackScenario",
    "Consensus",
    "CostModel",
    "EnergyParams",
    "Engine",
    "Protocol",
    "RoundMetrics",
    "RunResult",
    "SimConfig",
    "compare",
    "run",
]
