"""
Tightness report for the second-order cone relaxations at a solution
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from loguru import logger

from config import Config
from errors import ModelError
from formulation.program import ConicProgram
from solver.models import Solution


@dataclass
class ConeSlack:
    name: str
    block: str
    kind: str
    tag: str
    slack: float
    relative: float
    flagged: bool

    def to_dict(self) -> dict:
        return {
            "cone": self.name,
            "block": self.block,
            "kind": self.kind,
            "tag": self.tag,
            "slack": self.slack,
            "relative_slack": self.relative,
            "flagged": self.flagged,
        }


@dataclass
class ConeResidualReport:
    tolerance: float
    cones: List[ConeSlack] = field(default_factory=list)

    @property
    def flagged(self) -> List[ConeSlack]:
        return [c for c in self.cones if c.flagged]

    @property
    def tight(self) -> bool:
        return not self.flagged

    @property
    def max_relative(self) -> float:
        return max((c.relative for c in self.cones), default=0.0)

    @property
    def max_slack(self) -> float:
        return max((c.slack for c in self.cones), default=0.0)

    def to_dict(self) -> dict:
        return {
            "tolerance": self.tolerance,
            "tight": self.tight,
            "max_relative_slack": self.max_relative,
            "max_slack": self.max_slack,
            "flagged": [c.to_dict() for c in self.flagged],
            "cones": [c.to_dict() for c in self.cones],
        }


def check_cone_residuals(solution: Solution, program: ConicProgram, tolerance: Optional[float] = None,
                         tags: Sequence[str] = ("relaxation",)) -> ConeResidualReport:
    """Per-cone slack t - ||x|| (or y z - ||x||^2); cones above tolerance are flagged"""
    tolerance = Config.CONE_SLACK_TOL if tolerance is None else tolerance
    if solution.x is None:
        raise ModelError("cone residuals need a primal point")
    report = ConeResidualReport(tolerance=tolerance)
    for cone in program.cones:
        if cone.tag not in tags:
            continue
        slack = cone.slack(solution.x)
        relative = slack / cone.scale(solution.x)
        report.cones.append(ConeSlack(cone.name, cone.block, cone.kind, cone.tag, float(slack),
                                      float(relative), relative > tolerance))
    if report.flagged:
        worst = max(report.flagged, key=lambda c: c.relative)
        logger.warning(f"{len(report.flagged)} relaxation cone(s) not tight; worst {worst.name} "
                       f"relative slack {worst.relative:.3e}")
    else:
        logger.info(f"All {len(report.cones)} relaxation cones tight (max relative slack {report.max_relative:.2e})")
    return report
