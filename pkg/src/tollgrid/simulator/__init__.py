"""Deterministic traffic generator publishing GPS updates over the bus."""

from tollgrid.simulator.service import (
    LOCATION_TOPIC,
    SIM_ACK_TOPIC,
    SIM_CONFIG_TOPIC,
    SimulatorService,
)
from tollgrid.simulator.sim import (
    DEFAULT_GPS_NOISE_M,
    DEFAULT_SPEED_MPS,
    DEFAULT_UPDATE_INTERVAL_MS,
    DEFAULT_VEHICLE_COUNT,
    SimConfig,
    SimConfigError,
    TrafficSim,
    VehicleState,
)

__all__ = [
    "DEFAULT_GPS_NOISE_M",
    "DEFAULT_SPEED_MPS",
    "DEFAULT_UPDATE_INTERVAL_MS",
    "DEFAULT_VEHICLE_COUNT",
    "LOCATION_TOPIC",
    "SIM_ACK_TOPIC",
    "SIM_CONFIG_TOPIC",
    "SimConfig",
    "SimConfigError",
    "SimulatorService",
    "TrafficSim",
    "VehicleState",
]
