"""
Multi-cut / single-cut GBD with synchronous or asynchronous subproblem updates

The coordinator owns the cut pool and the trace. Subproblem solves run on a
thread pool; a virtual clock, not wall time, decides when each answer
reaches the master, so a run is reproducible from its inputs and seed.
"""
import asyncio
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional

from loguru import logger

from config import Config
from errors import ConfigError
from formulation.assemble import FirstStageDecisions, FormulationOptions, OpfMode
from gbd.decompose import Decomposition, decompose
from gbd.master import MasterProblem, MasterSolution
from gbd.models import BendersCut, CutKind, CutMode, GbdResult, GbdTrace, IterationRecord, StopRule
from gbd.schedule import Arrival, DelayModel, EventQueue, ready
from gbd.subproblems import SubproblemAnswer, SubproblemWorker
from grid.models import AC_SYSTEM, NetworkCase
from powerflow.linearization import OperatingPoint, solve_base_power_flow
from robust.scenarios import ScenarioSet, build_scenario_set


class GbdEngine:
    def __init__(self, decomposition: Decomposition, cut_mode: CutMode = CutMode.MULTI,
                 delay: Optional[DelayModel] = None, residual_tol: Optional[float] = None,
                 gap_tol: Optional[float] = None, max_iter: Optional[int] = None,
                 backend: Optional[str] = None, workers: Optional[int] = None):
        self.decomposition = decomposition
        self.cut_mode = CutMode(cut_mode)
        self.sp_ids = decomposition.sp_ids
        self.delay = delay or DelayModel.sync(self.sp_ids)
        if set(self.delay.latencies) != set(self.sp_ids):
            raise ConfigError(f"delay model covers {sorted(self.delay.latencies)}, subproblems are {self.sp_ids}")
        if self.cut_mode is CutMode.SINGLE and not self.delay.synchronous:
            raise ConfigError("single-cut GBD runs synchronously only")
        self.residual_tol = Config.GBD_RESIDUAL if residual_tol is None else residual_tol
        self.gap_tol = Config.GBD_GAP if gap_tol is None else gap_tol
        self.max_iter = max_iter or Config.GBD_MAX_ITER
        self.backend = backend
        self.workers = workers or Config.WORKERS
        self.master = MasterProblem(decomposition, self.cut_mode, backend)
        self.order = {sp: k for k, sp in enumerate(self.sp_ids)}

    def _initial_point(self) -> Dict[str, float]:
        point = {}
        for sp in self.decomposition.subproblems:
            for name, replica in zip(sp.boundary, sp.replicas):
                point[replica] = sp.initial[name]
        return point

    def _residuals(self, answers: Dict[str, SubproblemAnswer], point: Dict[str, float]) -> Dict[str, float]:
        residuals = {}
        for sp in self.sp_ids:
            answer = answers.get(sp)
            if answer is None:
                residuals[sp] = math.inf
                continue
            residuals[sp] = max((abs(answer.boundary[r] - point[r]) for r in answer.boundary), default=0.0)
        return residuals

    def _cuts(self, arrived: List[SubproblemAnswer], iteration: int) -> List[BendersCut]:
        cuts = [a.cut for a in arrived if a.cut is not None]
        if self.cut_mode is CutMode.MULTI or not cuts:
            return cuts
        if all(a.feasible for a in arrived):
            return [BendersCut.aggregate(cuts, iteration)]
        return [BendersCut.aggregate([c for c in cuts if c.kind is CutKind.FEASIBILITY], iteration)]

    def _decisions(self, mp: MasterSolution, answers: Dict[str, SubproblemAnswer],
                   point: Dict[str, float]) -> FirstStageDecisions:
        decomposition = self.decomposition
        decisions = FirstStageDecisions(mode=decomposition.mode.value, switching=decomposition.switching)
        program = self.master.base
        for var in program.variables:
            if var.name.startswith("alpha["):
                key = int(var.name[6:-1])
                decisions.alpha[key] = int(round(mp.solution.x[var.index]))
        ac = decomposition.subproblem(AC_SYSTEM)
        x = answers[AC_SYSTEM].solution.x
        for var in ac.program.variables:
            if var.name.startswith("pg["):
                decisions.pg[int(var.name[3:-1])] = float(x[var.index])
            elif var.name.startswith("qg["):
                decisions.qg[int(var.name[3:-1])] = float(x[var.index])
        if decomposition.mode is OpfMode.EROPF:
            for sp in decomposition.subproblems:
                for name, replica in zip(sp.boundary, sp.replicas):
                    decisions.boundary[name] = point[replica]
        return decisions

    async def run(self) -> GbdResult:
        loop = asyncio.get_running_loop()
        trace = GbdTrace(list(self.sp_ids))
        queue = EventQueue()
        point = self._initial_point()
        history: Dict[int, Dict[str, float]] = {0: point}
        mp_history: Dict[int, MasterSolution] = {}
        answers: Dict[str, SubproblemAnswer] = {}
        last_update = {sp: 0 for sp in self.sp_ids}
        known_values: Dict[str, float] = {}
        best_ub, best = math.inf, None
        lb, ub = -math.inf, math.inf
        clock = 0.0
        stop = StopRule.ITERATION_LIMIT
        iteration = 0

        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            workers = {sp.sp_id: SubproblemWorker(sp, self.backend) for sp in self.decomposition.subproblems}

            def dispatch(sp_id: str, at: float, it: int, values: Dict[str, float]) -> None:
                future = loop.run_in_executor(executor, workers[sp_id].answer, dict(values), it)
                queue.push(Arrival(at + self.delay.duration(sp_id), self.order[sp_id], sp_id, it, future))

            for sp in self.sp_ids:
                dispatch(sp, clock, 0, point)

            while iteration < self.max_iter:
                arrived: List[SubproblemAnswer] = []
                while queue:
                    event = queue.pop()
                    clock = max(clock, event.finish)
                    arrived.append(await event.payload)
                    if ready([a.sp_id for a in arrived], last_update, iteration, self.delay):
                        while queue and queue.peek().finish <= clock:
                            arrived.append(await queue.pop().payload)
                        break
                arrived.sort(key=lambda a: self.order[a.sp_id])

                if self.cut_mode is CutMode.SINGLE and not all(a.feasible for a in arrived):
                    arrived = list(await asyncio.gather(*(
                        loop.run_in_executor(executor, workers[a.sp_id].solve_rsp, a.point, a.iteration)
                        for a in arrived)))

                for answer in arrived:
                    answers[answer.sp_id] = answer
                    last_update[answer.sp_id] = iteration
                    if answer.feasible:
                        known_values[answer.sp_id] = answer.value
                added = sum(self.master.add_cut(cut) for cut in self._cuts(arrived, iteration))

                if len(known_values) == len(self.sp_ids):
                    ub = sum(known_values.values())
                solved_at = {a.iteration for a in answers.values()}
                if (len(answers) == len(self.sp_ids) and all(a.feasible for a in answers.values())
                        and len(solved_at) == 1 and min(solved_at) >= 1):
                    candidate = sum(a.value for a in answers.values())
                    if candidate < best_ub:
                        at = min(solved_at)
                        best_ub = candidate
                        best = (mp_history[at], dict(answers), history[at])

                mp = await loop.run_in_executor(executor, self.master.solve)
                if mp.lb < lb - 1e-6 * max(1.0, abs(lb)):
                    logger.warning(f"GBD lower bound decreased from {lb} to {mp.lb}")
                lb = mp.lb
                point = mp.replicas
                history[iteration + 1] = point
                mp_history[iteration + 1] = mp

                residuals = self._residuals(answers, point)
                record = IterationRecord(
                    iteration=iteration, virtual_time=clock, ub=ub, best_ub=best_ub, lb=lb,
                    active=tuple(a.sp_id for a in arrived), computing=tuple(queue.pending()),
                    residuals=residuals, cuts_added=added, answers={sp: a.label for sp, a in answers.items()},
                )
                trace.append(record)
                logger.info(f"GBD iteration {iteration}: t={clock:.2f} LB={lb:.8f} UB={ub:.8f} "
                            f"best={best_ub:.8f} residual={record.max_residual:.2e} "
                            f"active={','.join(record.active)}")

                all_feasible = len(answers) == len(self.sp_ids) and all(a.feasible for a in answers.values())
                iteration += 1
                if all_feasible and record.max_residual <= self.residual_tol:
                    stop = StopRule.RESIDUAL
                    break
                gap = (best_ub - lb) / max(abs(lb), 1e-10) if not math.isinf(best_ub) else math.inf
                if self.gap_tol > 0 and gap <= self.gap_tol:
                    stop = StopRule.GAP
                    break
                for answer in arrived:
                    dispatch(answer.sp_id, clock, iteration, point)

        converged = stop is not StopRule.ITERATION_LIMIT
        if stop is StopRule.RESIDUAL and best is None:
            # answers from different iterates that agree with the newest replicas
            latest = max(a.iteration for a in answers.values())
            best_ub = ub
            mp_at = mp_history.get(latest, mp_history[max(mp_history)])
            best = (mp_at, dict(answers), history[latest])
        objective = best_ub if not math.isinf(best_ub) else None
        decisions = self._decisions(*best) if best is not None else None
        if converged:
            logger.info(f"GBD converged by {stop.value} after {iteration} iterations, objective {objective}")
        else:
            logger.warning(f"GBD hit the iteration limit ({self.max_iter}); LB {lb:.8f}, best UB {best_ub}")
        return GbdResult(
            objective=objective, lb=lb, ub=ub, best_ub=best_ub, converged=converged, stop_rule=stop,
            iterations=iteration, virtual_time=clock, decisions=decisions, trace=trace,
            cuts=list(self.master.cuts),
        )


def _prepare(case: NetworkCase, op_point: Optional[OperatingPoint], mode: OpfMode,
             scenarios: Optional[ScenarioSet], options: Optional[FormulationOptions]) -> Decomposition:
    op_point = op_point or solve_base_power_flow(case)
    scenarios = scenarios or build_scenario_set(case)
    return decompose(case, op_point, mode, scenarios, options)


def run_gbd(case: NetworkCase, op_point: Optional[OperatingPoint] = None, mode: OpfMode = OpfMode.EROPF,
            cut_mode: CutMode = CutMode.MULTI, delay: Optional[DelayModel] = None,
            scenarios: Optional[ScenarioSet] = None, options: Optional[FormulationOptions] = None,
            **thresholds) -> GbdResult:
    """Decompose and iterate until the coupling residual or gap rule fires"""
    decomposition = _prepare(case, op_point, mode, scenarios, options)
    engine = GbdEngine(decomposition, cut_mode, delay, **thresholds)
    return asyncio.run(engine.run())


def simulate_async(decomposition: Decomposition, delay: DelayModel, cut_mode: CutMode = CutMode.MULTI,
                   **thresholds) -> GbdTrace:
    """Discrete-event run of an existing decomposition; returns the iteration trace"""
    return asyncio.run(GbdEngine(decomposition, cut_mode, delay, **thresholds).run()).trace
