"""
Optimality and relaxed (feasibility) subproblems

The OSP is the subproblem with its boundary pinned to the master's replica
values. When it is infeasible, the RSP replaces the objective by the L1 norm
of slacks on the pins. Pin duals are sensitivities of the optimal value to
the replica values, which makes them the cut gradients directly.
"""
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from loguru import logger

from errors import SolverError
from formulation.program import LinExpr
from gbd.decompose import SubproblemSpec
from gbd.models import BendersCut, CutKind
from solver.backends import get_backend
from solver.models import Solution, SolveStatus

MEASURE_TOL = 1e-9


@dataclass
class SubproblemAnswer:
    sp_id: str
    iteration: int
    feasible: bool
    value: float
    cut: Optional[BendersCut]
    boundary: Dict[str, float]
    point: Dict[str, float]
    solution: Solution

    @property
    def label(self) -> str:
        return "osp" if self.feasible else "rsp"


class SubproblemWorker:
    """Keeps one compiled OSP and one compiled RSP per subproblem"""

    def __init__(self, spec: SubproblemSpec, backend: Optional[str] = None):
        self.spec = spec
        self.osp = get_backend(backend).load(spec.program)
        self.relaxed = self._relaxed_program()
        self.rsp = get_backend(backend).load(self.relaxed)

    def _relaxed_program(self):
        program = self.spec.program.copy()
        program.name = f"{program.name}:relaxed"
        slack = LinExpr()
        for name in self.spec.boundary:
            row = program.constraint(self.spec.pin(name))
            up = program.add_variable(f"e+[{name}]", 0.0, owner=self.spec.sp_id)
            down = program.add_variable(f"e-[{name}]", 0.0, owner=self.spec.sp_id)
            row.terms[up.index] = 1.0
            row.terms[down.index] = -1.0
            slack = slack + up + down
        program.objective = slack
        return program

    def _pin(self, program, point: Dict[str, float]) -> None:
        for name, replica in zip(self.spec.boundary, self.spec.replicas):
            program.set_rhs(self.spec.pin(name), point[replica])

    def _boundary(self, program, x: np.ndarray) -> Dict[str, float]:
        return {replica: float(x[program.get(name).index])
                for name, replica in zip(self.spec.boundary, self.spec.replicas)}

    def _gradient(self, solution: Solution) -> Dict[str, float]:
        return {replica: solution.duals.get(self.spec.pin(name), 0.0)
                for name, replica in zip(self.spec.boundary, self.spec.replicas)}

    def solve_osp(self, point: Dict[str, float], iteration: int) -> Optional[SubproblemAnswer]:
        """Pinned subproblem; None when infeasible"""
        self._pin(self.spec.program, point)
        solution = self.osp.solve()
        if solution.status is SolveStatus.INFEASIBLE:
            logger.debug(f"OSP {self.spec.sp_id} infeasible at iteration {iteration}")
            return None
        if not solution.optimal:
            raise SolverError(f"OSP {self.spec.sp_id} returned {solution.status.value}",
                              {"sp": self.spec.sp_id, "iteration": iteration})
        cut = BendersCut(CutKind.OPTIMALITY, self.spec.sp_id, iteration, self._gradient(solution),
                         {r: point[r] for r in self.spec.replicas}, solution.objective)
        return SubproblemAnswer(self.spec.sp_id, iteration, True, solution.objective, cut,
                                self._boundary(self.spec.program, solution.x), dict(point), solution)

    def solve_rsp(self, point: Dict[str, float], iteration: int) -> SubproblemAnswer:
        """L1-relaxed pins; always feasible, so failure here is a model error"""
        self._pin(self.relaxed, point)
        solution = self.rsp.solve()
        if not solution.optimal:
            raise SolverError(f"relaxed subproblem {self.spec.sp_id} returned {solution.status.value}",
                              {"sp": self.spec.sp_id, "iteration": iteration})
        measure = max(0.0, solution.objective)
        cut = None
        if measure > MEASURE_TOL:
            cut = BendersCut(CutKind.FEASIBILITY, self.spec.sp_id, iteration, self._gradient(solution),
                             {r: point[r] for r in self.spec.replicas}, measure)
        else:
            logger.debug(f"RSP {self.spec.sp_id} measure {measure:.2e}; no feasibility cut")
        return SubproblemAnswer(self.spec.sp_id, iteration, False, measure, cut,
                                self._boundary(self.relaxed, solution.x), dict(point), solution)

    def answer(self, point: Dict[str, float], iteration: int) -> SubproblemAnswer:
        return self.solve_osp(point, iteration) or self.solve_rsp(point, iteration)


def solve_osp(spec: SubproblemSpec, point: Dict[str, float], iteration: int = 0,
              backend: Optional[str] = None) -> Optional[SubproblemAnswer]:
    return SubproblemWorker(spec, backend).solve_osp(point, iteration)


def solve_rsp(spec: SubproblemSpec, point: Dict[str, float], iteration: int = 0,
              backend: Optional[str] = None) -> SubproblemAnswer:
    return SubproblemWorker(spec, backend).solve_rsp(point, iteration)
