"""
Per-unit conversion on the case base (S_base in MVA, V_base in kV)
"""
from typing import Union

from errors import UnitError
from grid.models import CaseBase

# unit -> dimension
UNITS = {
    "pu": None,
    "MW": "power",
    "MVAr": "power",
    "MVA": "power",
    "kV": "voltage",
    "ohm": "impedance",
    "S": "admittance",
    "kA": "current",
}

DIMENSIONS = ("power", "voltage", "impedance", "admittance", "current", "dimensionless")


def base_value(dimension: str, base: CaseBase) -> float:
    """Base quantity for a dimension, in the SI-ish unit the case uses"""
    if dimension == "power":
        return base.s_mva
    if dimension == "voltage":
        return base.v_kv
    if dimension == "impedance":
        return base.z_ohm
    if dimension == "admittance":
        return 1.0 / base.z_ohm
    if dimension == "current":
        return base.i_ka
    if dimension == "dimensionless":
        return 1.0
    raise UnitError(f"unknown dimension '{dimension}'")


def _check(unit: str, dimension: str) -> None:
    if unit not in UNITS:
        raise UnitError(f"unknown unit '{unit}'")
    expected = UNITS[unit]
    if expected is not None and expected != dimension:
        raise UnitError(f"unit '{unit}' is a {expected} unit, expected {dimension}")


def to_per_unit(value: float, unit: str, dimension: str, base: CaseBase) -> float:
    _check(unit, dimension)
    if unit == "pu":
        return float(value)
    return float(value) / base_value(dimension, base)


def from_per_unit(value: float, unit: str, dimension: str, base: CaseBase) -> float:
    _check(unit, dimension)
    if unit == "pu":
        return float(value)
    return float(value) * base_value(dimension, base)


def parse_quantity(raw: Union[float, int, dict], dimension: str, base: CaseBase) -> float:
    """Accept a bare per-unit number or {"value": x, "unit": u}"""
    if isinstance(raw, bool):
        raise UnitError("boolean given where a quantity is expected")
    if isinstance(raw, (int, float)):
        return float(raw)
    if isinstance(raw, dict) and "value" in raw:
        return to_per_unit(raw["value"], raw.get("unit", "pu"), dimension, base)
    raise UnitError(f"cannot read quantity from {raw!r}")
