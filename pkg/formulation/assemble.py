"""
Centralized model assembly for DOPF, ROPF and E-ROPF
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence

import numpy as np
from loguru import logger

from config import Config
from errors import FormulationError
from formulation.blocks import (
    FIRST_STAGE_KINDS, Scope, build_ac_block, build_mtdc_block, build_objective, build_res_block,
    build_vsc_block,
)
from formulation.program import ConicProgram
from grid.models import AC_SYSTEM, NetworkCase
from powerflow.linearization import OperatingPoint
from powerflow.newton import NodalInjections
from robust.scenarios import Scenario
from robust.validity import esm_validity_check


class OpfMode(str, Enum):
    DOPF = "dopf"
    ROPF = "ropf"
    EROPF = "eropf"


@dataclass
class FormulationOptions:
    segments: int = field(default_factory=lambda: Config.POLYGON_SEGMENTS)
    envelope: int = field(default_factory=lambda: Config.ENVELOPE_SEGMENTS)
    switching: bool = True
    res_limit: str = "cap"


def boundary_keys(case: NetworkCase) -> set:
    """(kind, key) of every AC-side boundary variable"""
    keys = set()
    for vsc in case.vscs:
        if vsc.res is not None:
            keys |= {("pr2v", vsc.res), ("qr2v", vsc.res), ("ures", vsc.res)}
        else:
            keys |= {("pa2v", vsc.ac_node), ("qa2v", vsc.ac_node), ("u", vsc.ac_node)}
    return keys


def add_coupling(scope: Scope, vsc_id: int, system_side, station_side) -> None:
    """b - b' = 0 for one boundary triple"""
    for label, b, b_rep in zip(("p", "q", "u"), system_side, station_side):
        scope.add(b - b_rep, "==", 0.0, f"couple_{label}[{vsc_id}]", "coupling")


def _build_copy(case: NetworkCase, op_point: OperatingPoint, scenario: Scenario, scope: Scope,
                options: FormulationOptions) -> Dict[str, List[str]]:
    handles = [build_ac_block(scope, case, op_point, options.segments)]
    for res in case.res_units:
        handles.append(build_res_block(scope, case, res.id, scenario.value(res.id), options.segments,
                                       options.res_limit))
    build_mtdc_block(scope, case, options.switching)
    for h in handles:
        for vsc_id, triple in h.boundary.items():
            replica = build_vsc_block(scope, case, vsc_id, options.envelope)
            add_coupling(scope, vsc_id, triple, replica)
    build_objective(scope, case, scope.weight)
    return {h.system: h.names() for h in handles}


def assemble_centralized(case: NetworkCase, op_point: OperatingPoint, scenarios: Sequence[Scenario],
                         mode: OpfMode = OpfMode.DOPF,
                         options: Optional[FormulationOptions] = None) -> ConicProgram:
    """One mixed-binary conic program over all scenario copies"""
    mode = OpfMode(mode)
    options = options or FormulationOptions()
    if not scenarios:
        raise FormulationError("scenario set is empty")
    if mode is OpfMode.DOPF and len(scenarios) != 1:
        raise FormulationError(f"DOPF takes a single scenario, got {len(scenarios)}")

    program = ConicProgram(f"{case.name}:{mode.value}")
    weight = 1.0 / len(scenarios)
    shared_keys = boundary_keys(case) if mode is OpfMode.EROPF else frozenset()
    for scenario in scenarios:
        label = None if mode is OpfMode.DOPF else scenario.name
        scope = Scope(program, label, shared_kinds=FIRST_STAGE_KINDS, shared_keys=shared_keys, weight=weight)
        boundary = _build_copy(case, op_point, scenario, scope, options)
        if not program.boundary:
            program.boundary = boundary
    if mode is not OpfMode.DOPF:
        esm_validity_check(program, strict=True)
    logger.info(f"Assembled {mode.value.upper()} program over {len(scenarios)} scenario(s): {program.summary()}")
    return program


def scenarios_for_mode(mode: OpfMode, extremes: Sequence[Scenario], nominal: Scenario) -> List[Scenario]:
    return [nominal] if OpfMode(mode) is OpfMode.DOPF else list(extremes)


@dataclass
class FirstStageDecisions:
    mode: str
    switching: bool
    alpha: Dict[int, int] = field(default_factory=dict)
    pg: Dict[int, float] = field(default_factory=dict)
    qg: Dict[int, float] = field(default_factory=dict)
    boundary: Dict[str, float] = field(default_factory=dict)

    def fixed_bounds(self) -> Dict[str, tuple]:
        """Variable name -> (value, value) in a single-scenario program"""
        fixed = {}
        for line_id, status in self.alpha.items():
            fixed[f"alpha[{line_id}]"] = (float(status), float(status))
        for gen_id, value in self.pg.items():
            fixed[f"pg[{gen_id}]"] = (value, value)
        for gen_id, value in self.qg.items():
            fixed[f"qg[{gen_id}]"] = (value, value)
        for name, value in self.boundary.items():
            fixed[name] = (value, value)
        return fixed

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "switching": self.switching,
            "alpha": {str(k): v for k, v in sorted(self.alpha.items())},
            "pg": {str(k): v for k, v in sorted(self.pg.items())},
            "qg": {str(k): v for k, v in sorted(self.qg.items())},
            "boundary": dict(sorted(self.boundary.items())),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FirstStageDecisions":
        return cls(
            mode=data["mode"],
            switching=bool(data.get("switching", True)),
            alpha={int(k): int(v) for k, v in data.get("alpha", {}).items()},
            pg={int(k): float(v) for k, v in data.get("pg", {}).items()},
            qg={int(k): float(v) for k, v in data.get("qg", {}).items()},
            boundary={str(k): float(v) for k, v in data.get("boundary", {}).items()},
        )


def _key_of(name: str) -> int:
    return int(name[name.index("[") + 1:name.index("]")])


def extract_decisions(program: ConicProgram, x: np.ndarray, mode: OpfMode,
                      switching: bool = True) -> FirstStageDecisions:
    """First-stage values: topology, generator set points and, for E-ROPF, boundaries"""
    mode = OpfMode(mode)
    decisions = FirstStageDecisions(mode=mode.value, switching=switching)
    for var in program.variables:
        if "@" in var.name:
            continue
        if var.name.startswith("alpha["):
            decisions.alpha[_key_of(var.name)] = int(round(x[var.index]))
        elif var.name.startswith("pg["):
            decisions.pg[_key_of(var.name)] = float(x[var.index])
        elif var.name.startswith("qg["):
            decisions.qg[_key_of(var.name)] = float(x[var.index])
    if mode is OpfMode.EROPF:
        for names in program.boundary.values():
            for name in names:
                decisions.boundary[name] = float(x[program.get(name).index])
    return decisions


def injections_from_solution(case: NetworkCase, program: ConicProgram, x: np.ndarray,
                             scenario: Optional[str] = None) -> NodalInjections:
    """Nodal AC injections and linear-model voltages of one scenario copy"""
    def value(kind: str, key) -> float:
        for name in (f"{kind}[{key}]@{scenario}" if scenario else None, f"{kind}[{key}]"):
            if name and name in program:
                return float(x[program.get(name).index])
        raise FormulationError(f"solution has no variable {kind}[{key}]")

    p = np.array([-n.load_p for n in case.ac_nodes], dtype=float)
    q = np.array([-n.load_q for n in case.ac_nodes], dtype=float)
    index = {n.id: k for k, n in enumerate(case.ac_nodes)}
    for gen in case.generators:
        p[index[gen.node]] += value("pg", gen.id)
        q[index[gen.node]] += value("qg", gen.id)
    for vsc in case.vscs_of(AC_SYSTEM):
        p[index[vsc.ac_node]] -= value("pa2v", vsc.ac_node)
        q[index[vsc.ac_node]] -= value("qa2v", vsc.ac_node)
    u_lin = np.array([value("u", n.id) for n in case.ac_nodes])
    slack = index[case.slack_node.id]
    return NodalInjections(p=p, q=q, slack_voltage=float(np.sqrt(u_lin[slack])), u_lin=u_lin)


def topology_report(case: NetworkCase, decisions: FirstStageDecisions) -> List[dict]:
    rows = []
    for line in case.dc_lines:
        status = decisions.alpha.get(line.id, int(line.closed))
        rows.append({
            "line": line.id,
            "from": line.from_node,
            "to": line.to_node,
            "default": int(line.closed),
            "alpha": status,
            "changed": status != int(line.closed),
        })
    return rows
