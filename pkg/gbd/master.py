"""
Benders master: VSC-MTDC blocks, boundary replicas and the accumulated cuts
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

from loguru import logger

from errors import MasterInfeasibleError
from formulation.program import ConicProgram, lin_sum
from gbd.decompose import Decomposition
from gbd.models import BendersCut, CutKind, CutMode
from solver.branch_bound import solve_mixed
from solver.models import Solution, SolveStatus

MAX_FILTER_CUTS = 10


@dataclass
class MasterSolution:
    replicas: Dict[str, float]
    z: Dict[str, float]
    lb: float
    solution: Solution


class MasterProblem:
    """Base master program plus a de-duplicated cut pool"""

    def __init__(self, decomposition: Decomposition, cut_mode: CutMode = CutMode.MULTI,
                 backend: Optional[str] = None):
        self.decomposition = decomposition
        self.cut_mode = CutMode(cut_mode)
        self.backend = backend
        self.cuts: List[BendersCut] = []
        self._keys = set()
        self.base = decomposition.master.copy()
        self.z_ids = decomposition.sp_ids if self.cut_mode is CutMode.MULTI else ["all"]
        z = [self.base.add_variable(f"z[{sp}]", decomposition.z_min, owner="master")
             for sp in self.z_ids]
        self.base.add_objective(lin_sum(z))
        self.replica_names = [r for sp in decomposition.subproblems for r in sp.replicas]

    @property
    def z_floor(self) -> float:
        return self.decomposition.z_min * len(self.z_ids)

    def add_cut(self, cut: BendersCut) -> bool:
        """False when an identical cut is already in the pool"""
        key = cut.key()
        if key in self._keys:
            return False
        self._keys.add(key)
        self.cuts.append(cut)
        return True

    def build(self, cuts: Optional[Sequence[BendersCut]] = None) -> ConicProgram:
        program = self.base.copy()
        for k, cut in enumerate(self.cuts if cuts is None else cuts):
            expr = lin_sum(-g * program.get(name) for name, g in cut.gradient.items())
            if cut.kind is CutKind.OPTIMALITY:
                expr = expr + program.get(f"z[{cut.sp_id}]")
            program.add_constraint(expr, ">=", cut.constant(), name=f"cut[{k}]", block="cuts")
        return program

    def solve(self) -> MasterSolution:
        program = self.build()
        solution = solve_mixed(program, self.backend)
        if solution.status is SolveStatus.INFEASIBLE:
            subset = self.minimal_infeasible_subset()
            raise MasterInfeasibleError(f"master infeasible with {len(self.cuts)} cuts", subset)
        if solution.x is None:
            raise MasterInfeasibleError(f"master solve ended with status {solution.status.value}", [])
        replicas = {name: solution.value(program, name) for name in self.replica_names}
        z = {sp: solution.value(program, f"z[{sp}]") for sp in self.z_ids}
        lb = sum(z.values())
        logger.debug(f"Master: {len(self.cuts)} cuts, LB {lb:.8f}, {solution.nodes} B&B nodes")
        return MasterSolution(replicas, z, lb, solution)

    def minimal_infeasible_subset(self) -> List[BendersCut]:
        """Deletion filter over the cut pool; empty when the pool is too large to filter"""
        if len(self.cuts) > MAX_FILTER_CUTS:
            logger.error(f"Master infeasible; {len(self.cuts)} cuts is too many to isolate a subset")
            return []
        subset = list(self.cuts)
        for cut in list(subset):
            trial = [c for c in subset if c is not cut]
            if solve_mixed(self.build(trial), self.backend).status is SolveStatus.INFEASIBLE:
                subset = trial
        logger.error(f"Master infeasible; minimal cut subset: {[c.to_dict() for c in subset]}")
        return subset


def solve_mp(master: MasterProblem) -> MasterSolution:
    return master.solve()
