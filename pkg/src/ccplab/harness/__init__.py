from .config import SCENARIOS, ScenarioConfig, parse_config
from .output import emit, render
from .scenarios import ResultEnvelope, Table, run_scenario

__all__ = [
    "SCENARIOS",
    "ResultEnvelope",
    "ScenarioConfig",
    "Table",
    "emit",
    "parse_config",
    "render",
    "run_scenario",
]
