"""
Monte-Carlo robustness of first-stage decisions
"""
import asyncio
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger

from config import Config
from errors import ConfigError, OpfError
from formulation.assemble import FirstStageDecisions, FormulationOptions, OpfMode, assemble_centralized
from grid.models import NetworkCase
from powerflow.linearization import OperatingPoint
from robust.scenarios import Scenario
from solver.branch_bound import solve_mixed


@dataclass
class ScenarioOutcome:
    index: int
    name: str
    available: dict
    feasible: bool
    objective: Optional[float]
    status: str

    def to_row(self) -> dict:
        row = {"index": self.index, "scenario": self.name, "feasible": int(self.feasible),
               "objective": "" if self.objective is None else f"{self.objective:.10f}", "status": self.status}
        for res_id, value in sorted(self.available.items()):
            row[f"pbar[{res_id}]"] = f"{value:.10f}"
        return row


@dataclass
class RobustnessReport:
    mode: str
    outcomes: List[ScenarioOutcome] = field(default_factory=list)

    @property
    def total(self) -> int:
        return len(self.outcomes)

    @property
    def feasible_count(self) -> int:
        return sum(o.feasible for o in self.outcomes)

    @property
    def feasible_ratio(self) -> float:
        return self.feasible_count / self.total if self.total else 0.0

    def _objectives(self) -> np.ndarray:
        return np.array([o.objective for o in self.outcomes if o.feasible], dtype=float)

    @property
    def objective_min(self) -> Optional[float]:
        values = self._objectives()
        return float(values.min()) if values.size else None

    @property
    def objective_max(self) -> Optional[float]:
        values = self._objectives()
        return float(values.max()) if values.size else None

    @property
    def objective_mean(self) -> Optional[float]:
        values = self._objectives()
        return float(values.mean()) if values.size else None

    def summary(self) -> dict:
        return {
            "mode": self.mode,
            "scenarios": self.total,
            "feasible": self.feasible_count,
            "feasible_ratio": self.feasible_ratio,
            "objective_min": self.objective_min,
            "objective_max": self.objective_max,
            "objective_mean": self.objective_mean,
        }

    def to_dict(self) -> dict:
        return {"summary": self.summary(), "scenarios": [o.to_row() for o in self.outcomes]}


def evaluate_scenario(case: NetworkCase, op_point: OperatingPoint, decisions: FirstStageDecisions,
                      scenario: Scenario, index: int, options: FormulationOptions,
                      backend: Optional[str] = None) -> ScenarioOutcome:
    """Second-stage recourse for one realization with the first stage pinned"""
    program = assemble_centralized(case, op_point, [scenario], OpfMode.DOPF, options)
    fixed = {name: bounds for name, bounds in decisions.fixed_bounds().items() if name in program}
    try:
        solution = solve_mixed(program.with_bounds(fixed), backend)
    except OpfError as e:
        logger.error(f"Scenario {scenario.name} could not be evaluated: {e}")
        return ScenarioOutcome(index, scenario.name, scenario.as_dict(), False, None, "error")
    feasible = solution.optimal
    return ScenarioOutcome(index, scenario.name, scenario.as_dict(), feasible,
                           solution.objective if feasible else None, solution.status.value)


async def evaluate_robustness_async(case: NetworkCase, op_point: OperatingPoint,
                                    decisions: FirstStageDecisions, samples: Sequence[Scenario],
                                    options: Optional[FormulationOptions] = None,
                                    backend: Optional[str] = None,
                                    workers: Optional[int] = None) -> RobustnessReport:
    if not samples:
        raise ConfigError("robustness evaluation needs at least one scenario")
    options = replace(options or FormulationOptions(), switching=decisions.switching)
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers or Config.WORKERS) as executor:
        tasks = [
            loop.run_in_executor(executor, evaluate_scenario, case, op_point, decisions, scenario, k, options, backend)
            for k, scenario in enumerate(samples)
        ]
        outcomes = await asyncio.gather(*tasks)
    report = RobustnessReport(decisions.mode, sorted(outcomes, key=lambda o: o.index))
    logger.info(f"{decisions.mode.upper()} decisions feasible in {report.feasible_count}/{report.total} scenarios")
    return report


def evaluate_robustness(case: NetworkCase, op_point: OperatingPoint, decisions: FirstStageDecisions,
                        samples: Sequence[Scenario], options: Optional[FormulationOptions] = None,
                        backend: Optional[str] = None, workers: Optional[int] = None) -> RobustnessReport:
    """Fix first-stage decisions, solve every sampled scenario, tally feasibility and objectives"""
    return asyncio.run(evaluate_robustness_async(case, op_point, decisions, samples, options, backend, workers))
