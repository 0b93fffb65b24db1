"""Mobility-aware user association in a grid-city mmWave network."""

from .engine import AssociationState, MetricsReport, run
from .geometry import NetworkMap, generate_map, los_clear
from .mobility import Scenario, Trajectory, generate_trajectory, position_at
from .radio import EpochSchedule, RadioParams, candidate_set, compute_epochs, rate, snr

__all__ = [
    "AssociationState", "EpochSchedule", "MetricsReport", "NetworkMap", "RadioParams", "Scenario",
    "Trajectory", "candidate_set", "compute_epochs", "generate_map", "generate_trajectory", "los_clear",
    "position_at", "rate", "run", "snr",
]
