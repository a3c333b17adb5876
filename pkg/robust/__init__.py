from robust.scenarios import Scenario, ScenarioSet, build_scenario_set, enumerate_extremes, sample_scenarios
from robust.validity import ValidityReport, esm_validity_check

__all__ = [
    "Scenario", "ScenarioSet", "build_scenario_set", "enumerate_extremes", "sample_scenarios",
    "ValidityReport", "esm_validity_check",
]
