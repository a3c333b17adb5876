"""
Network case model: data types, per-unit conversion, case files and validation
"""
from grid.loader import bundled_case_path, case_from_dict, case_to_dict, dump_case, load_case
from grid.models import AC_SYSTEM, NetworkCase, ValidationReport, Violation, res_system
from grid.validation import validate_case

__all__ = [
    "AC_SYSTEM",
    "NetworkCase",
    "ValidationReport",
    "Violation",
    "bundled_case_path",
    "case_from_dict",
    "case_to_dict",
    "dump_case",
    "load_case",
    "res_system",
    "validate_case",
]
