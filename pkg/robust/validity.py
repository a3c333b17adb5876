"""
Structural check that extreme-scenario robustness carries over to the whole box

Uncertain parameters may only appear as right-hand sides of linear rows,
and every nonlinear constraint must be a second-order cone.
"""
from dataclasses import dataclass, field
from typing import List

from loguru import logger

from errors import FormulationError
from formulation.program import CONE_KINDS, ConicProgram


@dataclass
class ValidityReport:
    program: str
    issues: List[str] = field(default_factory=list)
    parameter_rows: int = 0
    cones: int = 0

    @property
    def passed(self) -> bool:
        return not self.issues

    def to_dict(self) -> dict:
        return {
            "program": self.program,
            "passed": self.passed,
            "parameter_rows": self.parameter_rows,
            "cones": self.cones,
            "issues": list(self.issues),
        }


def esm_validity_check(program: ConicProgram, strict: bool = False) -> ValidityReport:
    report = ValidityReport(program.name, cones=len(program.cones))
    for row in program.constraints:
        if row.rhs_param:
            report.parameter_rows += 1
        if row.param_terms:
            params = ", ".join(sorted(set(row.param_terms.values())))
            report.issues.append(f"row '{row.name}': uncertain parameter(s) {params} multiply variables")
        if row.products:
            report.issues.append(f"row '{row.name}': {len(row.products)} variable product term(s)")
    for cone in program.cones:
        if cone.kind not in CONE_KINDS:
            report.issues.append(f"cone '{cone.name}': unsupported kind '{cone.kind}'")
        if cone.params:
            report.issues.append(f"cone '{cone.name}': depends on uncertain parameter(s) {', '.join(cone.params)}")

    if report.passed:
        logger.info(f"Scenario validity check passed for '{program.name}' "
                    f"({report.parameter_rows} parameter rows, {report.cones} cones)")
    else:
        logger.error(f"Scenario validity check failed for '{program.name}': {'; '.join(report.issues)}")
        if strict:
            raise FormulationError(f"program '{program.name}' fails the scenario validity check: "
                                   f"{report.issues[0]}")
    return report
