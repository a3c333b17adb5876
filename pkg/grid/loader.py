"""
Case file reading and writing

The case file is a JSON document (see docs/case_schema.md). Quantities are
per-unit numbers or {"value": x, "unit": "MW"} objects converted on load.
"""
import json
from pathlib import Path
from typing import Any, Dict, Union

from loguru import logger

from errors import CaseFormatError, CaseValidationError, UnitError
from grid.models import (
    AcBranch, AcNode, CaseBase, DcLine, DcNode, Generator, NetworkCase, ResUnit, VscStation,
)
from grid.units import parse_quantity

FORMAT_VERSION = 1
DATA_DIR = Path(__file__).parent / "data"

REQUIRED = object()

# section -> field -> (kind, default); kind is a unit dimension or int/bool
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "ac_nodes": {
        "id": ("int", REQUIRED),
        "v_min": ("voltage", 0.955),
        "v_max": ("voltage", 1.045),
        "load_p": ("power", 0.0),
        "load_q": ("power", 0.0),
        "g_sh": ("admittance", 0.0),
        "b_sh": ("admittance", 0.0),
        "slack": ("bool", False),
    },
    "ac_branches": {
        "id": ("int", REQUIRED),
        "from": ("int", REQUIRED),
        "to": ("int", REQUIRED),
        "r": ("impedance", None),
        "x": ("impedance", None),
        "g": ("admittance", None),
        "b": ("admittance", None),
        "s_max": ("power", 1.0),
        "segments": ("int", None),
    },
    "generators": {
        "id": ("int", REQUIRED),
        "node": ("int", REQUIRED),
        "p_max": ("power", REQUIRED),
        "p_base": ("power", 0.0),
        "pf_cap": ("dimensionless", 0.9),
        "pf_ind": ("dimensionless", 0.9),
        "c1": ("dimensionless", 0.0),
        "c2": ("dimensionless", 0.0),
        "c3": ("dimensionless", 0.0),
    },
    "res_units": {
        "id": ("int", REQUIRED),
        "s_max": ("power", REQUIRED),
        "p_low": ("power", REQUIRED),
        "p_high": ("power", REQUIRED),
        "v_min": ("voltage", 0.955),
        "v_max": ("voltage", 1.045),
    },
    "dc_nodes": {
        "id": ("int", REQUIRED),
        "v_min": ("voltage", 0.955),
        "v_max": ("voltage", 1.045),
    },
    "dc_lines": {
        "id": ("int", REQUIRED),
        "from": ("int", REQUIRED),
        "to": ("int", REQUIRED),
        "r": ("impedance", REQUIRED),
        "switchable": ("bool", False),
        "closed": ("bool", True),
    },
    "vsc_stations": {
        "id": ("int", REQUIRED),
        "dc_node": ("int", REQUIRED),
        "ac_node": ("int", None),
        "res": ("int", None),
        "b_f": ("admittance", 0.0),
        "a1": ("dimensionless", 0.0),
        "a2": ("dimensionless", 0.0),
        "a3": ("dimensionless", 0.0),
        "i_max": ("current", 1.0),
        "delta_max": ("dimensionless", 1.0),
        "r_tf": ("impedance", 0.001),
        "x_tf": ("impedance", 0.01),
        "r_c": ("impedance", 0.001),
        "x_c": ("impedance", 0.01),
        "v_min": ("voltage", 0.955),
        "v_max": ("voltage", 1.045),
    },
}

OPTIONAL_SECTIONS = {"res_units", "generators", "vsc_stations", "dc_nodes", "dc_lines"}


def _read_field(entry: dict, name: str, kind: str, default, base: CaseBase, location: str):
    if name not in entry or entry[name] is None:
        if default is REQUIRED:
            raise CaseFormatError("missing required field", field=name, location=location)
        return default
    raw = entry[name]
    try:
        if kind == "int":
            if isinstance(raw, bool) or not isinstance(raw, int):
                raise CaseFormatError("expected an integer", field=name, location=location)
            return raw
        if kind == "bool":
            if not isinstance(raw, bool):
                raise CaseFormatError("expected true/false", field=name, location=location)
            return raw
        return parse_quantity(raw, kind, base)
    except UnitError as e:
        raise UnitError(str(e), field=name, location=location) from e


def _read_section(doc: dict, section: str, base: CaseBase) -> list:
    entries = doc.get(section)
    if entries is None:
        if section in OPTIONAL_SECTIONS:
            return []
        raise CaseFormatError("missing required section", field=section, location="<root>")
    if not isinstance(entries, list):
        raise CaseFormatError("section must be a list", field=section, location="<root>")

    schema = SCHEMA[section]
    parsed = []
    for index, entry in enumerate(entries):
        location = f"{section}[{index}]"
        if not isinstance(entry, dict):
            raise CaseFormatError("entry must be an object", field=section, location=location)
        unknown = sorted(set(entry) - set(schema))
        if unknown:
            raise CaseFormatError("unknown field", field=unknown[0], location=location)
        parsed.append({
            name: _read_field(entry, name, kind, default, base, location)
            for name, (kind, default) in schema.items()
        })
    return parsed


def _branch_admittance(row: dict, location: str):
    if row["g"] is not None and row["b"] is not None:
        return row["g"], row["b"]
    if row["r"] is not None and row["x"] is not None:
        z = complex(row["r"], row["x"])
        if z == 0:
            raise CaseFormatError("branch impedance must be non-zero", field="r", location=location)
        y = 1.0 / z
        return y.real, y.imag
    raise CaseFormatError("branch needs either (r, x) or (g, b)", field="g", location=location)


def case_from_dict(doc: Dict[str, Any], name: str = "case") -> NetworkCase:
    """Build a NetworkCase from a parsed case document"""
    if not isinstance(doc, dict):
        raise CaseFormatError("case document must be an object", location="<root>")
    version = doc.get("format_version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        raise CaseFormatError(f"unsupported format_version {version}", field="format_version", location="<root>")
    unknown = sorted(set(doc) - set(SCHEMA) - {"format_version", "name", "notes", "base"})
    if unknown:
        raise CaseFormatError("unknown section", field=unknown[0], location="<root>")

    raw_base = doc.get("base", {})
    base = CaseBase(s_mva=float(raw_base.get("s_mva", 100.0)), v_kv=float(raw_base.get("v_kv", 345.0)))

    ac_nodes = tuple(
        AcNode(id=r["id"], v_min=r["v_min"], v_max=r["v_max"], load_p=r["load_p"], load_q=r["load_q"],
               g_sh=r["g_sh"], b_sh=r["b_sh"], slack=r["slack"])
        for r in _read_section(doc, "ac_nodes", base)
    )
    branches = []
    for index, r in enumerate(_read_section(doc, "ac_branches", base)):
        g, b = _branch_admittance(r, f"ac_branches[{index}]")
        branches.append(AcBranch(id=r["id"], from_node=r["from"], to_node=r["to"], g=g, b=b,
                                 s_max=r["s_max"], segments=r["segments"]))
    generators = tuple(Generator(**r) for r in _read_section(doc, "generators", base))
    res_units = tuple(ResUnit(**r) for r in _read_section(doc, "res_units", base))
    dc_nodes = tuple(DcNode(**r) for r in _read_section(doc, "dc_nodes", base))
    dc_lines = tuple(
        DcLine(id=r["id"], from_node=r["from"], to_node=r["to"], r=r["r"],
               switchable=r["switchable"], closed=r["closed"])
        for r in _read_section(doc, "dc_lines", base)
    )
    vscs = tuple(VscStation(**r) for r in _read_section(doc, "vsc_stations", base))

    return NetworkCase(
        name=str(doc.get("name", name)),
        base=base,
        ac_nodes=ac_nodes,
        ac_branches=tuple(branches),
        generators=generators,
        res_units=res_units,
        dc_nodes=dc_nodes,
        dc_lines=dc_lines,
        vscs=vscs,
        notes=str(doc.get("notes", "")),
    )


def load_case(path: Union[str, Path], validate: bool = True) -> NetworkCase:
    """Read, convert to per-unit and validate a case file"""
    from grid.validation import validate_case

    path = Path(path)
    if not path.exists():
        for candidate in (DATA_DIR / path.name, bundled_case_path(path.name)):
            if candidate.exists():
                path = candidate
                break
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise CaseFormatError(f"case file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise CaseFormatError(f"not valid JSON: {e.msg}", location=f"line {e.lineno}, column {e.colno}") from e

    case = case_from_dict(doc, name=path.stem)
    if validate:
        report = validate_case(case)
        if not report.valid:
            raise CaseValidationError(report.violations)
    logger.info(f"Loaded case '{case.name}': {len(case.ac_nodes)} AC nodes, {len(case.res_units)} RES, "
                f"{len(case.dc_nodes)} DC nodes, {len(case.dc_lines)} DC lines, {len(case.vscs)} VSCs")
    return case


def case_to_dict(case: NetworkCase) -> dict:
    """Per-unit case document; reloading it yields an identical NetworkCase"""
    return {
        "format_version": FORMAT_VERSION,
        "name": case.name,
        "notes": case.notes,
        "base": {"s_mva": case.base.s_mva, "v_kv": case.base.v_kv},
        "ac_nodes": [
            {"id": n.id, "v_min": n.v_min, "v_max": n.v_max, "load_p": n.load_p, "load_q": n.load_q,
             "g_sh": n.g_sh, "b_sh": n.b_sh, "slack": n.slack}
            for n in case.ac_nodes
        ],
        "ac_branches": [
            {"id": br.id, "from": br.from_node, "to": br.to_node, "g": br.g, "b": br.b,
             "s_max": br.s_max, "segments": br.segments}
            for br in case.ac_branches
        ],
        "generators": [
            {"id": g.id, "node": g.node, "p_max": g.p_max, "p_base": g.p_base, "pf_cap": g.pf_cap,
             "pf_ind": g.pf_ind, "c1": g.c1, "c2": g.c2, "c3": g.c3}
            for g in case.generators
        ],
        "res_units": [
            {"id": r.id, "s_max": r.s_max, "p_low": r.p_low, "p_high": r.p_high,
             "v_min": r.v_min, "v_max": r.v_max}
            for r in case.res_units
        ],
        "dc_nodes": [{"id": n.id, "v_min": n.v_min, "v_max": n.v_max} for n in case.dc_nodes],
        "dc_lines": [
            {"id": ln.id, "from": ln.from_node, "to": ln.to_node, "r": ln.r,
             "switchable": ln.switchable, "closed": ln.closed}
            for ln in case.dc_lines
        ],
        "vsc_stations": [
            {"id": v.id, "dc_node": v.dc_node, "ac_node": v.ac_node, "res": v.res, "b_f": v.b_f,
             "a1": v.a1, "a2": v.a2, "a3": v.a3, "i_max": v.i_max, "delta_max": v.delta_max,
             "r_tf": v.r_tf, "x_tf": v.x_tf, "r_c": v.r_c, "x_c": v.x_c,
             "v_min": v.v_min, "v_max": v.v_max}
            for v in case.vscs
        ],
    }


def dump_case(case: NetworkCase, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(case_to_dict(case), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Case '{case.name}' written to {path}")
    return path


def bundled_case_path(name: str = "fig4") -> Path:
    return DATA_DIR / f"{name}.case"
