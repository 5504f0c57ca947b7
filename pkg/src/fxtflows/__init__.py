"""Fixed-time gradient flow solvers, bounds, and networked problem builders."""

from . import bounds, cli, core, dynamics, flows, network, problems, protocols, proximal, regret
from .core import Objective, SolveReport, Trajectory
from .dynamics import DisturbanceModel, IntegratorConfig, integrate, measure_settling
from .flows import FlowSpec
from .protocols import Protocol, ProtocolSum

__version__ = "0.1.0"

__all__ = [
    "Objective",
    "Trajectory",
    "SolveReport",
    "DisturbanceModel",
    "IntegratorConfig",
    "integrate",
    "measure_settling",
    "FlowSpec",
    "Protocol",
    "ProtocolSum",
    "bounds",
    "cli",
    "core",
    "dynamics",
    "flows",
    "network",
    "problems",
    "protocols",
    "proximal",
    "regret",
    "__version__",
]
