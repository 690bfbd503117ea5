"""Driven V-atom chirally coupled to a semi-infinite waveguide with coherent mirror feedback."""
from .errors import (
    ConfigError,
    DegenerateSteadyStateError,
    NumericalError,
    ParameterError,
    SimulationError,
    UndefinedRegimeError,
)
from .models import CavityConfig, RunConfig, RunResult, StepSettings, SystemParams, TimeBinConfig

__all__ = [
    "CavityConfig",
    "ConfigError",
    "DegenerateSteadyStateError",
    "NumericalError",
    "ParameterError",
    "RunConfig",
    "RunResult",
    "SimulationError",
    "StepSettings",
    "SystemParams",
    "TimeBinConfig",
    "UndefinedRegimeError",
]
