"""Agent-based simulation of group formation, individual learning and group adaptation on NK landscapes."""
from .auction import Bid, Group, collect_bids, run_auction
from .config import ConfigError, parse_config, preset
from .engine import RunTrace, Scenario, run_grid, run_period, run_replication, run_scenario
from .estimator import GroupAdaptationSimulator
from .landscape import InterdependenceMatrix, Landscape, build_matrix, generate, global_optimum, performance
from .metrics import ScenarioReport, aggregate, emit_tables, interaction_coefficient, offsetting_effects, significance
from .population import Agent, IncentiveScheme, decide, estimated_utility, init_population, learn_forget_step

__all__ = [
    "Agent", "Bid", "ConfigError", "Group", "GroupAdaptationSimulator", "IncentiveScheme",
    "InterdependenceMatrix", "Landscape", "RunTrace", "Scenario", "ScenarioReport", "aggregate",
    "build_matrix", "collect_bids", "decide", "emit_tables", "estimated_utility", "generate",
    "global_optimum", "init_population", "interaction_coefficient", "learn_forget_step",
    "offsetting_effects", "parse_config", "performance", "preset", "run_auction", "run_grid",
    "run_period", "run_replication", "run_scenario", "significance",
]
__version__ = "0.1.0"
