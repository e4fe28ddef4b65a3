from medtest.configuration.analysis import AnalysisSpec
from medtest.configuration.base_config import BaseConfig, InvalidConfiguration
from medtest.configuration.plan import SimulationPlan
from medtest.configuration.scenario import ScenarioConfig

__all__ = [
    "AnalysisSpec",
    "BaseConfig",
    "InvalidConfiguration",
    "ScenarioConfig",
    "SimulationPlan",
]
