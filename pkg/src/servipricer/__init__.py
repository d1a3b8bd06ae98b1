"""Simulation, calibration and pricing of full-service maintenance contracts."""

from .model import (
    ContractQuote, EventRecord, GammaCost, HazardParams, MachineProfile, ModelParams,
    PortfolioDataset, SeverityParams, TariffPlan, Timeline, TypeLogitParams, ValidationError,
    enumerate_profiles, table3_params,
)

__version__ = "0.1.0"

__all__ = [
    "ContractQuote", "EventRecord", "GammaCost", "HazardParams", "MachineProfile", "ModelParams",
    "PortfolioDataset", "SeverityParams", "TariffPlan", "Timeline", "TypeLogitParams",
    "ValidationError", "enumerate_profiles", "table3_params",
]
