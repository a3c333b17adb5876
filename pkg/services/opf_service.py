"""
Orchestration of case loading, centralized solves, GBD runs and studies
"""
import asyncio
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Union

from loguru import logger

from config import Config
from errors import ConfigError, SolverError
from formulation.assemble import (
    FirstStageDecisions, FormulationOptions, OpfMode, assemble_centralized, extract_decisions,
    injections_from_solution, scenarios_for_mode, topology_report,
)
from formulation.program import ConicProgram
from gbd.decompose import Decomposition, decompose
from gbd.engine import GbdEngine
from gbd.models import CutMode, GbdResult
from gbd.schedule import DEFAULT_STALENESS, DelayModel
from grid.loader import load_case
from grid.models import NetworkCase
from powerflow.linearization import AccuracyStudy, OperatingPoint, accuracy_study, solve_base_power_flow
from powerflow.newton import NodalInjections
from robust.evaluation import RobustnessReport, evaluate_robustness
from robust.scenarios import ScenarioSet, build_scenario_set
from robust.validity import ValidityReport, esm_validity_check
from solver.branch_bound import EnumerationResult, enumerate_binaries, solve_mixed
from solver.models import Solution
from solver.residuals import ConeResidualReport, check_cone_residuals


@dataclass
class CentralizedRun:
    case: NetworkCase
    mode: OpfMode
    program: ConicProgram
    solution: Solution
    validity: ValidityReport
    decisions: Optional[FirstStageDecisions] = None
    residuals: Optional[ConeResidualReport] = None
    topology: List[dict] = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.solution.has_point and self.decisions is not None

    def to_dict(self) -> dict:
        return {
            "case": self.case.name,
            "mode": self.mode.value,
            "program": self.program.summary(),
            "solution": self.solution.summary(),
            "values": dict(sorted(self.solution.values(self.program).items())),
            "validity": self.validity.to_dict(),
            "decisions": self.decisions.to_dict() if self.decisions else None,
            "topology": self.topology,
        }


@dataclass
class DelaySettings:
    """Communication setup for a GBD run; all None means synchronous"""
    situation: Optional[int] = None
    latencies: Optional[Sequence[float]] = None
    n_min: Optional[int] = None
    staleness: int = DEFAULT_STALENESS
    jitter: float = 0.0
    seed: Optional[int] = None

    @property
    def asynchronous(self) -> bool:
        return self.situation is not None or self.latencies is not None or self.n_min is not None

    def build(self, sp_ids: Sequence[str]) -> DelayModel:
        if self.situation is not None:
            model = DelayModel.situation(self.situation, sp_ids, self.staleness, self.jitter, self.seed)
            if self.n_min is not None:
                model = DelayModel(model.latencies, self.n_min, self.staleness, self.jitter, self.seed)
            return model
        if self.latencies is not None or self.n_min is not None:
            ratios = self.latencies or [1.0] * len(sp_ids)
            n_min = self.n_min if self.n_min is not None else len(sp_ids)
            return DelayModel.from_ratios(ratios, sp_ids, n_min, self.staleness, self.jitter, self.seed)
        return DelayModel.sync(sp_ids)


class OpfService:
    def __init__(self, backend: Optional[str] = None):
        self.backend = backend or Config.SOLVER_BACKEND

    def load(self, path: Union[str, Path]) -> NetworkCase:
        return load_case(path)

    def prepare(self, case: NetworkCase, samples: int = 0,
                seed: Optional[int] = None) -> tuple:
        """Base operating point and scenario set of a case"""
        op_point = solve_base_power_flow(case)
        scenarios = build_scenario_set(case, samples, Config.SEED if seed is None else seed)
        return op_point, scenarios

    def assemble(self, case: NetworkCase, mode: OpfMode, options: Optional[FormulationOptions] = None,
                 op_point: Optional[OperatingPoint] = None,
                 scenarios: Optional[ScenarioSet] = None) -> ConicProgram:
        mode = OpfMode(mode)
        op_point = op_point or solve_base_power_flow(case)
        scenarios = scenarios or build_scenario_set(case)
        chosen = scenarios_for_mode(mode, scenarios.extremes, scenarios.nominal)
        return assemble_centralized(case, op_point, chosen, mode, options)

    def solve_centralized(self, case: NetworkCase, mode: OpfMode,
                          options: Optional[FormulationOptions] = None,
                          op_point: Optional[OperatingPoint] = None,
                          scenarios: Optional[ScenarioSet] = None,
                          node_log: Optional[Callable[[dict], None]] = None) -> CentralizedRun:
        """Assemble the scenario program, branch-and-bound it, extract first-stage decisions"""
        mode = OpfMode(mode)
        options = options or FormulationOptions()
        program = self.assemble(case, mode, options, op_point, scenarios)
        validity = esm_validity_check(program)
        solution = solve_mixed(program, self.backend, node_log=node_log)
        run = CentralizedRun(case, mode, program, solution, validity)
        if not solution.has_point:
            logger.warning(f"{mode.value.upper()} on '{case.name}' ended {solution.status.value}")
            return run

        run.decisions = extract_decisions(program, solution.x, mode, options.switching)
        run.residuals = check_cone_residuals(solution, program)
        run.topology = topology_report(case, run.decisions)
        changed = [row["line"] for row in run.topology if row["changed"]]
        logger.info(f"{mode.value.upper()} objective {solution.objective:.8f}; "
                    f"switched lines: {changed or 'none'}")
        return run

    def enumerate_topologies(self, case: NetworkCase, mode: OpfMode,
                             options: Optional[FormulationOptions] = None,
                             op_point: Optional[OperatingPoint] = None,
                             scenarios: Optional[ScenarioSet] = None) -> EnumerationResult:
        """Solve every DC line status combination with the rest of the program continuous or B&B"""
        program = self.assemble(case, mode, options, op_point, scenarios)
        names = [f"alpha[{line.id}]" for line in case.dc_lines if f"alpha[{line.id}]" in program]
        return enumerate_binaries(program, names, self.backend)

    def gbd(self, case: NetworkCase, mode: OpfMode = OpfMode.EROPF, cut_mode: CutMode = CutMode.MULTI,
            delay: Optional[DelaySettings] = None, options: Optional[FormulationOptions] = None,
            op_point: Optional[OperatingPoint] = None, scenarios: Optional[ScenarioSet] = None,
            **thresholds) -> GbdResult:
        decomposition = self.decompose(case, mode, options, op_point, scenarios)
        return self.run_decomposition(decomposition, cut_mode, delay, **thresholds)

    def decompose(self, case: NetworkCase, mode: OpfMode = OpfMode.EROPF,
                  options: Optional[FormulationOptions] = None, op_point: Optional[OperatingPoint] = None,
                  scenarios: Optional[ScenarioSet] = None) -> Decomposition:
        op_point = op_point or solve_base_power_flow(case)
        scenarios = scenarios or build_scenario_set(case)
        return decompose(case, op_point, mode, scenarios, options)

    def run_decomposition(self, decomposition: Decomposition, cut_mode: CutMode = CutMode.MULTI,
                          delay: Optional[DelaySettings] = None, **thresholds) -> GbdResult:
        model = (delay or DelaySettings()).build(decomposition.sp_ids)
        engine = GbdEngine(decomposition, cut_mode, model, backend=self.backend, **thresholds)
        return asyncio.run(engine.run())

    def evaluate(self, case: NetworkCase, decisions: FirstStageDecisions, samples: int,
                 seed: Optional[int] = None, options: Optional[FormulationOptions] = None,
                 op_point: Optional[OperatingPoint] = None) -> RobustnessReport:
        if samples < 1:
            raise ConfigError("robustness evaluation needs at least one sampled scenario")
        op_point = op_point or solve_base_power_flow(case)
        scenarios = build_scenario_set(case, samples, Config.SEED if seed is None else seed)
        return evaluate_robustness(case, op_point, decisions, scenarios.samples, options, self.backend)

    def accuracy(self, case: NetworkCase, rounds: int,
                 options: Optional[FormulationOptions] = None) -> AccuracyStudy:
        """Successive re-linearization study on the deterministic OPF"""
        nominal = build_scenario_set(case).nominal

        def solve_at(point: OperatingPoint) -> NodalInjections:
            program = assemble_centralized(case, point, [nominal], OpfMode.DOPF, options)
            solution = solve_mixed(program, self.backend)
            if not solution.has_point:
                raise SolverError(f"DOPF at the updated operating point ended {solution.status.value}")
            return injections_from_solution(case, program, solution.x)

        study = accuracy_study(case, rounds, solve_at)
        logger.info(f"Linearization error by round: {study.errors}")
        return study


# Global OPF service instance
opf_service = OpfService()
