"""
Continuous conic backends

A backend loads one ConicProgram and solves its continuous relaxation
under given variable bounds. Binaries are relaxed to [lower, upper].
"""
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import Dict, Optional, Type

import cvxpy as cp
import numpy as np
from loguru import logger

from config import Config
from errors import ModelError, SolverError
from formulation.program import ConicProgram
from solver.models import Solution, SolveStatus, StandardForm, finalize


class ConicBackend(ABC):
    """Load a program once, then solve it repeatedly under different bounds or right-hand sides"""
    name = "abstract"

    def __init__(self):
        self.program: Optional[ConicProgram] = None
        self.form: Optional[StandardForm] = None

    def load(self, program: ConicProgram) -> "ConicBackend":
        self.program = program
        self.form = StandardForm.from_program(program)
        self._compile()
        return self

    def solve(self, lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None) -> Solution:
        """Solve the loaded program; rows are re-read so set_rhs changes take effect"""
        if self.program is None:
            raise ModelError("no program loaded")
        if not self.form.matches(self.program):
            logger.debug(f"Program '{self.program.name}' changed shape, recompiling")
            self.load(self.program)
        default_lower, default_upper = self.program.bounds()
        lower = default_lower if lower is None else np.asarray(lower, dtype=float)
        upper = default_upper if upper is None else np.asarray(upper, dtype=float)
        if np.any(lower > upper + 1e-12):
            return Solution(SolveStatus.INFEASIBLE, backend=self.name, diagnostics={"reason": "crossed bounds"})
        solution = self._solve(lower, upper)
        solution.backend = self.name
        return finalize(self.program, solution)

    @abstractmethod
    def _compile(self) -> None:
        ...

    @abstractmethod
    def _solve(self, lower: np.ndarray, upper: np.ndarray) -> Solution:
        ...


@lru_cache(maxsize=None)
def equality_dual_sign(solver: str) -> float:
    """Sign turning a cvxpy equality dual into d(opt)/d(rhs), measured on min x s.t. x == 3"""
    x = cp.Variable()
    rhs = cp.Parameter(value=3.0)
    row = x == rhs
    cp.Problem(cp.Minimize(x), [row, x >= -10]).solve(solver=solver)
    value = float(np.ravel(row.dual_value)[0])
    return 1.0 if value > 0 else -1.0


class CvxpyBackend(ConicBackend):
    """cvxpy binding; bounds and right-hand sides are Parameters so re-solves reuse the compiled problem"""
    name = "cvxpy"

    def __init__(self, solver: Optional[str] = None):
        super().__init__()
        self.solver = solver or Config.CVXPY_SOLVER
        self._problem = None

    def _compile(self, lower: Optional[np.ndarray] = None, upper: Optional[np.ndarray] = None) -> None:
        form = self.form
        if lower is None or upper is None:
            lower, upper = self.program.bounds()
        self._lo_idx = np.flatnonzero(np.isfinite(lower))
        self._up_idx = np.flatnonzero(np.isfinite(upper))
        self._x = cp.Variable(form.n)
        x = self._x
        self._b_eq = cp.Parameter(form.A_eq.shape[0]) if form.A_eq.shape[0] else None
        self._b_le = cp.Parameter(form.A_le.shape[0]) if form.A_le.shape[0] else None
        self._lb = cp.Parameter(len(self._lo_idx)) if len(self._lo_idx) else None
        self._ub = cp.Parameter(len(self._up_idx)) if len(self._up_idx) else None

        constraints = []
        self._eq_con = self._le_con = None
        if self._b_eq is not None:
            self._eq_con = form.A_eq @ x == self._b_eq
            constraints.append(self._eq_con)
        if self._b_le is not None:
            self._le_con = form.A_le @ x <= self._b_le
            constraints.append(self._le_con)
        if self._lb is not None:
            constraints.append(x[self._lo_idx] >= self._lb)
        if self._ub is not None:
            constraints.append(x[self._up_idx] <= self._ub)
        for cone in form.cones:
            t = cone.t @ x + cone.t0
            if cone.U.shape[0] == 0:
                constraints.append(t >= 0)
            else:
                constraints.append(cp.SOC(t, cone.U @ x + cone.u0))
        self._problem = cp.Problem(cp.Minimize(form.c @ x + form.c0), constraints)

    def _solve(self, lower: np.ndarray, upper: np.ndarray) -> Solution:
        if (not np.array_equal(np.flatnonzero(np.isfinite(lower)), self._lo_idx)
                or not np.array_equal(np.flatnonzero(np.isfinite(upper)), self._up_idx)):
            # a bound switched between finite and infinite
            self._compile(lower, upper)
        b_eq, b_le = self.form.rhs(self.program)
        if self._b_eq is not None:
            self._b_eq.value = b_eq
        if self._b_le is not None:
            self._b_le.value = b_le
        if self._lb is not None:
            self._lb.value = lower[self._lo_idx]
        if self._ub is not None:
            self._ub.value = upper[self._up_idx]

        try:
            self._problem.solve(solver=self.solver)
        except cp.error.SolverError as e:
            raise SolverError(f"{self.solver} failed on '{self.program.name}': {e}",
                              {"solver": self.solver, "program": self.program.name}) from e

        status = self._problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            return Solution(SolveStatus.INFEASIBLE, diagnostics={"solver_status": status})
        if status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            return Solution(SolveStatus.UNBOUNDED, diagnostics={"solver_status": status})
        if status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or self._x.value is None:
            raise SolverError(f"{self.solver} returned status '{status}' on '{self.program.name}'",
                              {"solver": self.solver, "solver_status": status})
        if status == cp.OPTIMAL_INACCURATE:
            logger.warning(f"{self.solver} reports an inaccurate optimum on '{self.program.name}'")

        sign = equality_dual_sign(self.solver)
        eq_sens = sign * np.ravel(self._eq_con.dual_value) if self._eq_con is not None else np.zeros(0)
        le_mult = np.maximum(np.ravel(self._le_con.dual_value), 0.0) if self._le_con is not None else np.zeros(0)
        return Solution(
            SolveStatus.OPTIMAL,
            x=np.array(self._x.value, dtype=float),
            objective=float(self._problem.value),
            duals=self.form.row_duals(self.program, eq_sens, le_mult),
            diagnostics={"solver_status": status},
        )


BACKENDS: Dict[str, Type[ConicBackend]] = {"cvxpy": CvxpyBackend}


def get_backend(name: Optional[str] = None) -> ConicBackend:
    name = name or Config.SOLVER_BACKEND
    if name == "reference" and "reference" not in BACKENDS:
        from solver.reference_ipm import ReferenceBackend
        BACKENDS["reference"] = ReferenceBackend
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ModelError(f"unknown solver backend '{name}'; expected one of {', '.join(Config.BACKENDS)}") from None


def solve_continuous(program: ConicProgram, backend: Optional[str] = None) -> Solution:
    """Solve a program whose binaries are all fixed (or absent)"""
    free = program.free_binaries()
    if free:
        raise ModelError(f"continuous solve with {len(free)} free binaries, e.g. '{free[0].name}'")
    solution = get_backend(backend).load(program).solve()
    logger.debug(f"Continuous solve of '{program.name}': {solution.status.value} {solution.objective}")
    return solution
