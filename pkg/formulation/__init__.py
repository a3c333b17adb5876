from formulation.assemble import (
    FirstStageDecisions, FormulationOptions, OpfMode, assemble_centralized, extract_decisions,
    injections_from_solution,
)
from formulation.program import ConicProgram, LinExpr, Variable

__all__ = [
    "FirstStageDecisions", "FormulationOptions", "OpfMode", "assemble_centralized", "extract_decisions",
    "injections_from_solution", "ConicProgram", "LinExpr", "Variable",
]
