"""
Benders cuts, iteration trace and run result
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

from formulation.assemble import FirstStageDecisions


class CutKind(str, Enum):
    OPTIMALITY = "optimality"
    FEASIBILITY = "feasibility"


class CutMode(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


class StopRule(str, Enum):
    RESIDUAL = "residual"
    GAP = "gap"
    ITERATION_LIMIT = "iteration-limit"


@dataclass
class BendersCut:
    """z >= intercept + g'(b' - point)  or  0 >= intercept + g'(b' - point)

    gradient and point are keyed by master replica names; intercept is the
    subproblem value (optimality) or its infeasibility measure (feasibility).
    """
    kind: CutKind
    sp_id: str
    iteration: int
    gradient: Dict[str, float]
    point: Dict[str, float]
    intercept: float

    def value(self, replica: Dict[str, float]) -> float:
        return self.intercept + sum(g * (replica[name] - self.point[name]) for name, g in self.gradient.items())

    def constant(self) -> float:
        """Right-hand side once the cut is written as z - g'b' >= constant (or -g'b' >= constant)"""
        return self.intercept - sum(g * self.point[name] for name, g in self.gradient.items())

    def key(self, digits: int = 9) -> Tuple:
        coeffs = tuple(sorted((name, round(g, digits)) for name, g in self.gradient.items() if round(g, digits)))
        return self.kind.value, self.sp_id, coeffs, round(self.constant(), digits)

    @staticmethod
    def aggregate(cuts: List["BendersCut"], iteration: int) -> "BendersCut":
        """Single-cut form: sum gradients and intercepts over subproblems"""
        kind = CutKind.FEASIBILITY if any(c.kind is CutKind.FEASIBILITY for c in cuts) else CutKind.OPTIMALITY
        gradient: Dict[str, float] = {}
        point: Dict[str, float] = {}
        for cut in cuts:
            for name, g in cut.gradient.items():
                gradient[name] = gradient.get(name, 0.0) + g
            point.update(cut.point)
        return BendersCut(kind, "all", iteration, gradient, point, sum(c.intercept for c in cuts))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "sp": self.sp_id,
            "iteration": self.iteration,
            "intercept": self.intercept,
            "gradient": dict(sorted(self.gradient.items())),
        }


@dataclass
class IterationRecord:
    iteration: int
    virtual_time: float
    ub: float
    best_ub: float
    lb: float
    active: Tuple[str, ...]
    computing: Tuple[str, ...]
    residuals: Dict[str, float]
    cuts_added: int
    answers: Dict[str, str]

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=math.inf)

    @property
    def gap(self) -> float:
        if math.isinf(self.ub) or self.lb == 0:
            return math.inf
        return (self.ub - self.lb) / abs(self.lb)

    def to_row(self, sp_ids: List[str]) -> dict:
        row = {
            "iteration": self.iteration,
            "virtual_time": f"{self.virtual_time:.6f}",
            "ub": f"{self.ub:.10f}",
            "best_ub": f"{self.best_ub:.10f}",
            "lb": f"{self.lb:.10f}",
            "gap": f"{self.gap:.10f}",
            "max_residual": f"{self.max_residual:.10e}",
            "active": " ".join(self.active),
            "computing": " ".join(self.computing),
            "cuts_added": self.cuts_added,
        }
        for sp in sp_ids:
            row[f"residual[{sp}]"] = f"{self.residuals.get(sp, math.inf):.10e}"
            row[f"answer[{sp}]"] = self.answers.get(sp, "")
        return row


@dataclass
class GbdTrace:
    sp_ids: List[str]
    records: List[IterationRecord] = field(default_factory=list)

    def append(self, record: IterationRecord) -> None:
        self.records.append(record)

    @property
    def lbs(self) -> List[float]:
        return [r.lb for r in self.records]

    def lb_monotone(self, tol: float = 1e-6) -> bool:
        values = self.lbs
        return all(b >= a - tol * max(1.0, abs(a)) for a, b in zip(values, values[1:]))

    def rows(self) -> List[dict]:
        return [r.to_row(self.sp_ids) for r in self.records]

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class GbdResult:
    objective: Optional[float]
    lb: float
    ub: float
    best_ub: float
    converged: bool
    stop_rule: StopRule
    iterations: int
    virtual_time: float
    decisions: Optional[FirstStageDecisions]
    trace: GbdTrace
    cuts: List[BendersCut] = field(default_factory=list)

    @property
    def gap(self) -> float:
        if math.isinf(self.ub) or self.lb == 0:
            return math.inf
        return (self.ub - self.lb) / abs(self.lb)

    def summary(self) -> dict:
        return {
            "objective": self.objective,
            "lb": self.lb,
            "ub": self.ub,
            "best_ub": self.best_ub,
            "gap": self.gap,
            "converged": self.converged,
            "stop_rule": self.stop_rule.value,
            "iterations": self.iterations,
            "virtual_time": self.virtual_time,
            "cuts": len(self.cuts),
        }
