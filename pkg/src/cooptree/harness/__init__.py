from .evaluation import RocResult, Statistic, make_statistic, power_at_level, roc
from .ingest import IngestError, ingest
from .scenarios import SCENARIOS, ScenarioSpec, generate_scenario, get_scenario

__all__ = [
    "IngestError",
    "RocResult",
    "SCENARIOS",
    "ScenarioSpec",
    "Statistic",
    "generate_scenario",
    "get_scenario",
    "ingest",
    "make_statistic",
    "power_at_level",
    "roc",
]
