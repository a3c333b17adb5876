"""
Branch-and-bound over the binaries of a conic program

Node selection dives depth-first until the first incumbent exists, then
switches to best-bound. Branching picks the most fractional binary.
"""
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from config import Config
from errors import ModelError
from formulation.program import ConicProgram
from solver.backends import get_backend, solve_continuous
from solver.models import Solution, SolveStatus, finalize

INTEGRALITY_TOL = 1e-6

NodeLog = Callable[[dict], None]


@dataclass
class _Node:
    node_id: int
    depth: int
    bound: float
    lower: np.ndarray
    upper: np.ndarray
    branched: str = ""


def _relative_gap(incumbent: float, bound: float) -> float:
    if math.isinf(bound):
        return math.inf
    return max(0.0, incumbent - bound) / max(1e-10, abs(incumbent))


def _select(frontier: List[_Node], diving: bool) -> _Node:
    """Deepest node while no incumbent exists, then best bound (ties: deeper, older)"""
    if diving:
        key = lambda nd: (-nd.depth, nd.bound, nd.node_id)
    else:
        key = lambda nd: (nd.bound, -nd.depth, nd.node_id)
    best = min(frontier, key=key)
    frontier.remove(best)
    return best


def most_fractional(x: np.ndarray, binaries: np.ndarray) -> Optional[int]:
    """Binary furthest from integrality; ties go to the lowest index"""
    if not len(binaries):
        return None
    values = x[binaries]
    fractionality = np.minimum(values - np.floor(values), np.ceil(values) - values)
    k = int(np.argmax(fractionality))
    if fractionality[k] <= INTEGRALITY_TOL:
        return None
    return int(binaries[k])


def branch_and_bound(program: ConicProgram, backend: Optional[str] = None, gap: Optional[float] = None,
                     node_limit: Optional[int] = None, node_log: Optional[NodeLog] = None) -> Solution:
    """Depth-first dive to a first incumbent, then best-bound search over relaxations"""
    gap = Config.MIP_GAP if gap is None else gap
    node_limit = node_limit or Config.NODE_LIMIT
    solver = get_backend(backend).load(program)
    binaries = program.binaries()
    lower, upper = program.bounds()

    frontier = [_Node(0, 0, -math.inf, lower, upper)]
    incumbent: Optional[Solution] = None
    root_bound = None
    explored = 0
    next_id = 1

    while frontier:
        if explored >= node_limit:
            break
        node = _select(frontier, incumbent is None)
        if incumbent is not None and node.bound >= incumbent.objective - gap * abs(incumbent.objective):
            continue
        explored += 1
        relaxed = solver.solve(node.lower, node.upper)
        event = {"node": node.node_id, "depth": node.depth, "bound": None,
                 "incumbent": incumbent.objective if incumbent else None, "branched": node.branched,
                 "outcome": relaxed.status.value}

        if relaxed.status is SolveStatus.UNBOUNDED:
            if node.node_id == 0:
                logger.warning(f"Root relaxation of '{program.name}' is unbounded")
                return Solution(SolveStatus.UNBOUNDED, nodes=explored, backend=solver.name)
            _emit(node_log, event)
            continue
        if not relaxed.optimal:
            _emit(node_log, event)
            continue

        event["bound"] = relaxed.objective
        if node.node_id == 0:
            root_bound = relaxed.objective
        if incumbent is not None and relaxed.objective >= incumbent.objective - gap * abs(incumbent.objective):
            event["outcome"] = "pruned"
            _emit(node_log, event)
            continue

        index = most_fractional(relaxed.x, binaries)
        if index is None:
            relaxed.x[binaries] = np.round(relaxed.x[binaries])
            incumbent = relaxed
            event["outcome"] = "incumbent"
            event["incumbent"] = relaxed.objective
            logger.debug(f"B&B node {node.node_id}: new incumbent {relaxed.objective:.8f}")
            _emit(node_log, event)
            continue

        name = program.variables[index].name
        event["outcome"] = f"branch {name}={relaxed.x[index]:.4f}"
        _emit(node_log, event)
        for value in (0.0, 1.0):
            child_lower, child_upper = node.lower.copy(), node.upper.copy()
            child_lower[index] = child_upper[index] = value
            frontier.append(_Node(next_id, node.depth + 1, relaxed.objective, child_lower, child_upper,
                                  f"{name}={int(value)}"))
            next_id += 1

    open_bound = min((nd.bound for nd in frontier), default=math.inf)
    if incumbent is None:
        if frontier:
            logger.warning(f"B&B on '{program.name}' hit the node limit ({node_limit}) without an incumbent")
            return Solution(SolveStatus.GAP_LIMIT, nodes=explored, mip_gap=math.inf, backend=solver.name)
        logger.info(f"B&B on '{program.name}': infeasible after {explored} nodes")
        return Solution(SolveStatus.INFEASIBLE, nodes=explored, backend=solver.name)

    best_bound = min(open_bound, incumbent.objective)
    incumbent.mip_gap = _relative_gap(incumbent.objective, best_bound)
    incumbent.nodes = explored
    incumbent.diagnostics["root_bound"] = root_bound
    if frontier and incumbent.mip_gap > gap:
        incumbent.status = SolveStatus.GAP_LIMIT
        logger.warning(f"B&B on '{program.name}' stopped at the node limit with gap {incumbent.mip_gap:.2e}")
    else:
        logger.info(f"B&B on '{program.name}': objective {incumbent.objective:.8f} after {explored} nodes")
    return finalize(program, incumbent)


def _emit(node_log: Optional[NodeLog], event: dict) -> None:
    if node_log is not None:
        node_log(event)


def solve_mixed(program: ConicProgram, backend: Optional[str] = None, **kwargs) -> Solution:
    """Continuous solve when no binary is free, branch-and-bound otherwise"""
    if program.free_binaries():
        return branch_and_bound(program, backend, **kwargs)
    solution = solve_continuous(program, backend)
    solution.nodes = 1
    solution.mip_gap = 0.0 if solution.optimal else None
    return solution


@dataclass
class EnumerationResult:
    best: Solution
    assignment: Dict[str, int]
    outcomes: List[Tuple[Dict[str, int], str, Optional[float]]] = field(default_factory=list)


def enumerate_binaries(program: ConicProgram, names: Optional[Sequence[str]] = None,
                       backend: Optional[str] = None) -> EnumerationResult:
    """Exhaustive oracle: fix the named binaries in every combination and solve the rest"""
    names = list(names) if names is not None else [v.name for v in program.free_binaries()]
    for name in names:
        if not program.get(name).binary:
            raise ModelError(f"'{name}' is not a binary variable")
    if len(names) > 16:
        raise ModelError(f"refusing to enumerate 2^{len(names)} assignments")

    best, best_assignment, outcomes = None, {}, []
    for combo in itertools.product((0, 1), repeat=len(names)):
        assignment = dict(zip(names, combo))
        fixed = program.with_bounds({name: (value, value) for name, value in assignment.items()})
        solution = solve_mixed(fixed, backend)
        outcomes.append((assignment, solution.status.value, solution.objective))
        if solution.optimal and (best is None or solution.objective < best.objective):
            best, best_assignment = solution, assignment
    if best is None:
        best = Solution(SolveStatus.INFEASIBLE, nodes=len(outcomes))
    logger.info(f"Enumerated {len(outcomes)} assignments of {len(names)} binaries; best {best.objective}")
    return EnumerationResult(best=best, assignment=best_assignment, outcomes=outcomes)
