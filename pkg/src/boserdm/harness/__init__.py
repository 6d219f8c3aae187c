"""Scenario configuration, engine orchestration and file output."""

from .config import ScenarioConfig, load_config
from .runner import run_scenario, validate_scenario

__all__ = ["ScenarioConfig", "load_config", "run_scenario", "validate_scenario"]
