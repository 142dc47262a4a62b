"""Python access to the multi-level clustering swarm simulator."""

from ._core import (
    AggregationPolicy,
    BeliefGrid,
    ConfigError,
    InvariantViolation,
    IoError,
    ScenarioConfig,
    Simulation,
    aggregate,
    compress,
    data_amount,
    normalized_miss,
    run_direct_baseline,
    run_scenario,
    subtract,
)

__all__ = [
    "AggregationPolicy",
    "BeliefGrid",
    "ConfigError",
    "InvariantViolation",
    "IoError",
    "ScenarioConfig",
    "Simulation",
    "aggregate",
    "compress",
    "data_amount",
    "normalized_miss",
    "run_direct_baseline",
    "run_scenario",
    "subtract",
]
