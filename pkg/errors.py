"""
Exception hierarchy for the AC/MTDC OPF toolkit
"""
from typing import List, Optional, Sequence


class OpfError(Exception):
    """Base class for every error raised by this package"""


class ConfigError(OpfError):
    """Invalid run configuration or option combination"""


class CaseFormatError(OpfError):
    """Case file does not match the published schema"""

    def __init__(self, message: str, field: Optional[str] = None, location: Optional[str] = None):
        self.field = field
        self.location = location
        where = ""
        if field or location:
            where = f" (field '{field or '?'}' at {location or '?'})"
        super().__init__(f"{message}{where}")


class UnitError(CaseFormatError):
    """Quantity given in a unit of the wrong dimension or an unknown unit"""


class CaseValidationError(OpfError):
    """Case violates a structural invariant"""

    def __init__(self, violations: Sequence):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"case failed validation: {lines}")


class PowerFlowError(OpfError):
    """Nonlinear power flow could not be solved"""


class ConvergenceError(PowerFlowError):
    """Newton iterations exhausted without meeting the tolerance"""

    def __init__(self, message: str, trace: Optional[List[float]] = None):
        self.trace = list(trace or [])
        super().__init__(message)


class SingularJacobianError(PowerFlowError):
    """Jacobian is singular at the current iterate (degenerate case)"""


class LinearizationError(OpfError):
    """Invalid expansion point or missing linearization coefficients"""


class FormulationError(OpfError):
    """Model cannot be assembled from the given data"""


class ModelError(OpfError):
    """Malformed conic program handed to a solver"""


class SolverError(OpfError):
    """Backend failed numerically"""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        self.diagnostics = dict(diagnostics or {})
        super().__init__(message)


class DecompositionError(OpfError):
    """Case cannot be split into master and subproblems"""


class MasterInfeasibleError(OpfError):
    """Benders master became infeasible"""

    def __init__(self, message: str, cuts: Optional[list] = None):
        self.cuts = list(cuts or [])
        super().__init__(message)
