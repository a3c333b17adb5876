from solver.backends import ConicBackend, CvxpyBackend, get_backend, solve_continuous
from solver.branch_bound import EnumerationResult, branch_and_bound, enumerate_binaries, solve_mixed
from solver.models import Solution, SolveStatus
from solver.residuals import ConeResidualReport, check_cone_residuals

__all__ = [
    "ConicBackend", "CvxpyBackend", "get_backend", "solve_continuous",
    "EnumerationResult", "branch_and_bound", "enumerate_binaries", "solve_mixed",
    "Solution", "SolveStatus", "ConeResidualReport", "check_cone_residuals",
]
