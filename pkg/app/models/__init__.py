from .beamforming import Allocation, EffectiveRates, PhasePlan, PhaseVector, ScaOptions, Solution
from .database import Base, engine
from .experiment import ExperimentSpec, PropertyReport, ResultRow
from .result import ResultRecord
from .system import Scenario, SystemConfig

__all__ = [
    "Allocation",
    "EffectiveRates",
    "PhasePlan",
    "PhaseVector",
    "ScaOptions",
    "Solution",
    "Base",
    "engine",
    "ExperimentSpec",
    "PropertyReport",
    "ResultRow",
    "ResultRecord",
    "Scenario",
    "SystemConfig",
]
