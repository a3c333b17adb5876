"""
Solver result types and the matrix view of a conic program
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from errors import ModelError
from formulation.program import ConicProgram


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    GAP_LIMIT = "gap-limit"


@dataclass
class Solution:
    """Outcome of a continuous solve or of branch-and-bound

    duals maps a row name to d(optimal value)/d(row right-hand side).
    """
    status: SolveStatus
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    duals: Dict[str, float] = field(default_factory=dict)
    cone_residual: float = 0.0
    primal_residual: float = 0.0
    mip_gap: Optional[float] = None
    nodes: int = 0
    backend: str = ""
    diagnostics: Dict[str, object] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def has_point(self) -> bool:
        return self.x is not None

    def value(self, program: ConicProgram, name: str) -> float:
        return float(self.x[program.get(name).index])

    def values(self, program: ConicProgram) -> Dict[str, float]:
        if self.x is None:
            return {}
        return {v.name: float(self.x[v.index]) for v in program.variables}

    def block_duals(self, program: ConicProgram, block: str) -> Dict[str, float]:
        """Duals of every labeled row of one block"""
        return {row.name: self.duals[row.name] for row in program.constraints
                if row.block == block and row.name in self.duals}

    def summary(self) -> dict:
        return {
            "status": self.status.value,
            "objective": self.objective,
            "mip_gap": self.mip_gap,
            "nodes": self.nodes,
            "backend": self.backend,
            "cone_residual": self.cone_residual,
            "primal_residual": self.primal_residual,
        }


def finalize(program: ConicProgram, solution: Solution) -> Solution:
    """Fill residual fields from the primal point"""
    if solution.x is not None:
        solution.primal_residual = program.max_violation(solution.x)
        solution.cone_residual = max((max(0.0, -c.slack(solution.x)) for c in program.cones), default=0.0)
    return solution


@dataclass
class ConeData:
    """||U x + u0|| <= t x + t0, the SOC form of one program cone"""
    name: str
    t: np.ndarray
    t0: float
    U: np.ndarray
    u0: np.ndarray


@dataclass
class StandardForm:
    """Matrix view of a ConicProgram shared by the backends

    Rows with sense ">=" are stored negated among the "<=" rows; le_signs
    records the flip so duals can be mapped back to the original rows.
    """
    n: int
    c: np.ndarray
    c0: float
    A_eq: sparse.csr_matrix
    eq_rows: List[int]
    A_le: sparse.csr_matrix
    le_rows: List[int]
    le_signs: np.ndarray
    cones: List[ConeData]
    n_constraints: int
    n_cones: int

    @classmethod
    def from_program(cls, program: ConicProgram) -> "StandardForm":
        n = program.n
        c = np.zeros(n)
        for k, v in program.objective.terms.items():
            c[k] += v
        eq_data, eq_rows, le_data, le_rows, signs = [], [], [], [], []
        for r, row in enumerate(program.constraints):
            if row.products:
                raise ModelError(f"row '{row.name}' has bilinear terms; conic backends need linear rows")
            if row.sense == "==":
                eq_data.append(row.terms)
                eq_rows.append(r)
            else:
                sign = 1.0 if row.sense == "<=" else -1.0
                le_data.append({k: sign * v for k, v in row.terms.items()})
                le_rows.append(r)
                signs.append(sign)
        cones = [cls._cone_data(cone, n) for cone in program.cones]
        return cls(
            n=n, c=c, c0=program.objective.constant,
            A_eq=_rows_to_csr(eq_data, n), eq_rows=eq_rows,
            A_le=_rows_to_csr(le_data, n), le_rows=le_rows, le_signs=np.array(signs, dtype=float),
            cones=cones, n_constraints=len(program.constraints), n_cones=len(program.cones),
        )

    @staticmethod
    def _cone_data(cone, n: int) -> ConeData:
        def dense(expr):
            row = np.zeros(n)
            for k, v in expr.terms.items():
                row[k] += v
            return row, expr.constant

        body = [dense(e) for e in cone.body]
        if cone.kind == "soc":
            t, t0 = dense(cone.head[0])
            U = np.array([b[0] for b in body]).reshape(len(body), n)
            u0 = np.array([b[1] for b in body], dtype=float)
            return ConeData(cone.name, t, t0, U, u0)
        (y, y0), (z, z0) = dense(cone.head[0]), dense(cone.head[1])
        U = np.vstack([2.0 * b[0] for b in body] + [y - z]).reshape(len(body) + 1, n)
        u0 = np.array([2.0 * b[1] for b in body] + [y0 - z0], dtype=float)
        return ConeData(cone.name, y + z, y0 + z0, U, u0)

    def rhs(self, program: ConicProgram) -> Tuple[np.ndarray, np.ndarray]:
        rows = program.constraints
        b_eq = np.array([rows[r].rhs for r in self.eq_rows], dtype=float)
        b_le = np.array([rows[r].rhs for r in self.le_rows], dtype=float) * self.le_signs
        return b_eq, b_le

    def matches(self, program: ConicProgram) -> bool:
        return (self.n == program.n and self.n_constraints == len(program.constraints)
                and self.n_cones == len(program.cones))

    def row_duals(self, program: ConicProgram, eq_sens: np.ndarray, le_mult: np.ndarray) -> Dict[str, float]:
        """eq_sens: d(opt)/d(b_eq); le_mult: nonnegative multipliers of A_le x <= b_le"""
        duals = {}
        for r, value in zip(self.eq_rows, eq_sens):
            duals[program.constraints[r].name] = float(value)
        for r, sign, lam in zip(self.le_rows, self.le_signs, le_mult):
            duals[program.constraints[r].name] = float(-sign * lam)
        return duals


def _rows_to_csr(rows: List[Dict[int, float]], n: int) -> sparse.csr_matrix:
    data, indices, indptr = [], [], [0]
    for terms in rows:
        for k in sorted(terms):
            indices.append(k)
            data.append(terms[k])
        indptr.append(len(indices))
    return sparse.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=int), np.array(indptr)),
                             shape=(len(rows), n))
