"""Deterministic scenario simulator."""

from .detector import SyntheticDetector, detector_step
from .plant import ChasePlant, PlantConfig, plant_step
from .radar import RadarSample, SyntheticRadar, calibration_flight, radar_step
from .runner import RunResult, ScenarioRunner, run_scenario
from .scenario import Scenario, ScenarioError, bundled_scenario, bundled_scenarios, load_scenario, parse_scenario
from .targets import TargetScript

__all__ = [
    "ChasePlant", "PlantConfig", "plant_step", "TargetScript", "SyntheticRadar", "RadarSample", "radar_step",
    "calibration_flight", "SyntheticDetector", "detector_step", "Scenario", "ScenarioError", "load_scenario",
    "parse_scenario", "bundled_scenario", "bundled_scenarios", "RunResult", "ScenarioRunner", "run_scenario",
]
