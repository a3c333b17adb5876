"""
Split a case into a VSC-MTDC master and one subproblem per AC-side system
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from loguru import logger

from errors import DecompositionError
from formulation.assemble import FormulationOptions, OpfMode
from formulation.blocks import (
    Scope, add_generation_objective, add_res_objective, build_ac_block, build_mtdc_block, build_res_block,
    build_vsc_block,
)
from formulation.program import ConicProgram
from grid.models import AC_SYSTEM, NetworkCase, res_system
from powerflow.linearization import OperatingPoint
from robust.scenarios import Scenario, ScenarioSet
from robust.validity import esm_validity_check

BOUNDARY_LABELS = ("p", "q", "u")


@dataclass
class SubproblemSpec:
    """One AC-side system with its boundary pinned to master replica values

    boundary[k] in this program is coupled to replicas[k] in the master.
    """
    sp_id: str
    order: int
    program: ConicProgram
    boundary: List[str]
    replicas: List[str]
    vsc_ids: List[int]
    initial: Dict[str, float]

    def pin(self, name: str) -> str:
        return f"pin[{name}]"


@dataclass
class Decomposition:
    mode: OpfMode
    master: ConicProgram
    subproblems: List[SubproblemSpec]
    z_min: float
    switching: bool
    coupling: List[Tuple[str, str, str]] = field(default_factory=list)

    @property
    def sp_ids(self) -> List[str]:
        return [sp.sp_id for sp in self.subproblems]

    def subproblem(self, sp_id: str) -> SubproblemSpec:
        for sp in self.subproblems:
            if sp.sp_id == sp_id:
                return sp
        raise KeyError(f"no subproblem '{sp_id}'")


def z_lower_bound(case: NetworkCase) -> float:
    """Crude value floor for each subproblem epigraph variable"""
    return -10.0 * abs(sum(g.c3 for g in case.generators)) - 10.0 - sum(n.load_p for n in case.ac_nodes)


def _local_scenarios(mode: OpfMode, scenarios: ScenarioSet, res_id: int) -> List[Scenario]:
    if mode is OpfMode.EROPF:
        return scenarios.local[res_system(res_id)]
    return [Scenario.of("nominal", {res_id: scenarios.nominal.value(res_id)})]


def _add_pins(sp: SubproblemSpec) -> None:
    for name in sp.boundary:
        var = sp.program.get(name)
        sp.program.add_constraint(var, "==", sp.initial[name], name=sp.pin(name), block="coupling")


def _initial_boundary(case: NetworkCase, op_point: OperatingPoint, system: str, names: Sequence[str]) -> Dict[str, float]:
    """Zero exchange and the base power flow voltage (1.0 for RES terminals)"""
    values = {}
    for k, name in enumerate(names):
        label = BOUNDARY_LABELS[k % 3]
        if label != "u":
            values[name] = 0.0
        elif system == AC_SYSTEM:
            node_id = int(name[name.index("[") + 1:name.index("]")])
            values[name] = op_point.u_of(node_id)
        else:
            values[name] = 1.0
    return values


def decompose(case: NetworkCase, op_point: OperatingPoint, mode: OpfMode, scenarios: ScenarioSet,
              options: Optional[FormulationOptions] = None) -> Decomposition:
    """Master (VSC + MTDC blocks, boundary replicas, epigraph variables) plus per-system subproblems"""
    mode = OpfMode(mode)
    options = options or FormulationOptions()
    if mode is OpfMode.ROPF:
        raise DecompositionError("ROPF shares no boundary across scenarios and cannot be decomposed; use eropf")
    if not case.vscs or not case.dc_nodes:
        raise DecompositionError("case has no VSC-MTDC grid to decompose around")
    for system in case.systems:
        if not case.vscs_of(system):
            raise DecompositionError(f"AC system '{system}' has no VSC connection")

    master = ConicProgram(f"{case.name}:master")
    master_scope = Scope(master)
    build_mtdc_block(master_scope, case, options.switching)
    replica_of: Dict[int, Tuple[str, str, str]] = {}
    for vsc in case.vscs:
        triple = build_vsc_block(master_scope, case, vsc.id, options.envelope)
        replica_of[vsc.id] = tuple(v.name for v in triple)

    subproblems: List[SubproblemSpec] = []
    coupling = []
    for order, system in enumerate(case.systems):
        program = ConicProgram(f"{case.name}:{system}")
        if system == AC_SYSTEM:
            scope = Scope(program)
            handles = build_ac_block(scope, case, op_point, options.segments)
            add_generation_objective(scope, case, 1.0)
        else:
            res_id = int(system.split("#")[1])
            local = _local_scenarios(mode, scenarios, res_id)
            keys = {("pr2v", res_id), ("qr2v", res_id), ("ures", res_id)}
            weight = 1.0 / len(local)
            handles = None
            for scenario in local:
                label = scenario.name if mode is OpfMode.EROPF else None
                scope = Scope(program, label, shared_keys=keys, weight=weight)
                handles = build_res_block(scope, case, res_id, scenario.value(res_id), options.segments,
                                          options.res_limit)
                add_res_objective(scope, res_id, weight)
            if mode is OpfMode.EROPF:
                esm_validity_check(program, strict=True)

        boundary, replicas, vsc_ids = [], [], []
        for vsc_id in sorted(handles.boundary):
            names = [v.name for v in handles.boundary[vsc_id]]
            if set(names) & set(boundary):
                raise DecompositionError(f"system '{system}' reaches several VSCs through one boundary node")
            boundary += names
            replicas += list(replica_of[vsc_id])
            vsc_ids.append(vsc_id)
            coupling += [(system, b, r) for b, r in zip(names, replica_of[vsc_id])]

        sp = SubproblemSpec(system, order, program, boundary, replicas, vsc_ids,
                            _initial_boundary(case, op_point, system, boundary))
        _add_pins(sp)
        subproblems.append(sp)

    z_min = z_lower_bound(case)
    logger.info(f"Decomposed '{case.name}' ({mode.value}): master {master.summary()}, "
                f"{len(subproblems)} subproblems, {len(coupling)} coupled boundary variables")
    return Decomposition(mode, master, subproblems, z_min, options.switching, coupling)
