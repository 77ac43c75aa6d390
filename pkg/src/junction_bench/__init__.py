"""Un-signalized cross-intersection driving benchmark.

Route-constrained traffic simulation, scenario-based traffic generation,
rule-based and learned ego drivers, and the deterministic/stochastic test
harness.
"""
from .env import IntersectionEnv, Outcome, RewardConfig
from .road_network import Arm, Movement, Turn, build_default_intersection
from .scenario import (FUNCTIONAL_SCENARIOS, ConcreteScenario, LogicalScenario, StochasticConfig,
                       enumerate_grid, training_scenario)
from .vehicle_sim import SimConfig

__all__ = ["IntersectionEnv", "Outcome", "RewardConfig", "Arm", "Movement", "Turn",
           "build_default_intersection", "FUNCTIONAL_SCENARIOS", "ConcreteScenario",
           "LogicalScenario", "StochasticConfig", "enumerate_grid", "training_scenario",
           "SimConfig"]
