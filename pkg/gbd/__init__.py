from gbd.decompose import Decomposition, SubproblemSpec, decompose
from gbd.engine import GbdEngine, run_gbd, simulate_async
from gbd.master import MasterProblem, solve_mp
from gbd.models import BendersCut, CutKind, CutMode, GbdResult, GbdTrace, StopRule
from gbd.schedule import SITUATIONS, DelayModel
from gbd.subproblems import SubproblemWorker, solve_osp, solve_rsp

__all__ = [
    "Decomposition", "SubproblemSpec", "decompose", "GbdEngine", "run_gbd", "simulate_async",
    "MasterProblem", "solve_mp", "BendersCut", "CutKind", "CutMode", "GbdResult", "GbdTrace", "StopRule",
    "SITUATIONS", "DelayModel", "SubproblemWorker", "solve_osp", "solve_rsp",
]
