"""Energy-aware hierarchical federated learning over a wireless edge network.

The package simulates a fleet of battery-powered devices training a shared
classifier through two aggregation tiers (edge servers, then a central
massive-MIMO unit), with zero-forcing uplinks, block-diagonalized wireless
backhaul, RF energy transfer keeping batteries alive, and device-to-server
association chosen by an optimal, a heuristic, or a random policy.
"""

__version__ = "0.1.0"

from .association import (
    Association,
    DataSplit,
    EnergyScenario,
    InfeasibleError,
    bfs_optimal,
    divergence,
    h2rma_associate,
    random_associate,
    run_frames,
)
from .channel import ChannelError, bd_gains, sample_access, sample_rician, zf_decode
from .energy import EnergyError, EnergyLedger, grid_cost, optimal_wet
from .sim import (
    ConfigError,
    ExperimentResult,
    SimConfig,
    compare_policies,
    make_config,
    make_streams,
    run_experiment,
    sweep,
)

__all__ = [
    "Association",
    "ChannelError",
    "ConfigError",
    "DataSplit",
    "EnergyError",
    "EnergyLedger",
    "EnergyScenario",
    "ExperimentResult",
    "InfeasibleError",
    "SimConfig",
    "__version__",
    "bd_gains",
    "bfs_optimal",
    "compare_policies",
    "divergence",
    "grid_cost",
    "h2rma_associate",
    "make_config",
    "make_streams",
    "optimal_wet",
    "random_associate",
    "run_experiment",
    "run_frames",
    "sample_access",
    "sample_rician",
    "sweep",
    "zf_decode",
]
