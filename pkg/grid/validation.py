"""
Structural validation of network cases
"""
from collections import Counter
from typing import List

import networkx as nx

from grid.models import NetworkCase, ValidationReport, Violation


def _unique_ids(items, label: str) -> List[Violation]:
    counts = Counter(item.id for item in items)
    return [
        Violation("unique-id", f"{label} {item_id}", f"id used {count} times")
        for item_id, count in sorted(counts.items()) if count > 1
    ]


def _bounds(case: NetworkCase) -> List[Violation]:
    found = []
    ranged = [(f"AC node {n.id}", "v", n.v_min, n.v_max) for n in case.ac_nodes]
    ranged += [(f"DC node {n.id}", "v", n.v_min, n.v_max) for n in case.dc_nodes]
    ranged += [(f"RES {r.id}", "v", r.v_min, r.v_max) for r in case.res_units]
    ranged += [(f"RES {r.id}", "available power", r.p_low, r.p_high) for r in case.res_units]
    ranged += [(f"VSC {v.id}", "v", v.v_min, v.v_max) for v in case.vscs]
    for element, quantity, low, high in ranged:
        if low > high:
            found.append(Violation("bound-order", element, f"{quantity} lower bound {low} exceeds upper bound {high}"))
        if quantity == "v" and low <= 0:
            found.append(Violation("positive", element, "voltage bounds must be positive"))
    for res in case.res_units:
        if res.p_low < 0:
            found.append(Violation("bound-order", f"RES {res.id}", "available power must be non-negative"))
    return found


def _positivity(case: NetworkCase) -> List[Violation]:
    found = []
    for line in case.dc_lines:
        if line.r <= 0:
            found.append(Violation("positive", f"DC line {line.id}", "resistance must be positive"))
    for branch in case.ac_branches:
        if branch.s_max <= 0:
            found.append(Violation("positive", f"AC branch {branch.id}", "apparent-power cap must be positive"))
        if branch.g == 0 and branch.b == 0:
            found.append(Violation("positive", f"AC branch {branch.id}", "branch admittance must be non-zero"))
        if branch.segments is not None and branch.segments < 1:
            found.append(Violation("positive", f"AC branch {branch.id}", "polygon segment count must be at least 1"))
    for gen in case.generators:
        if gen.p_max < 0:
            found.append(Violation("positive", f"generator {gen.id}", "capacity must be non-negative"))
        for name, pf in (("pf_cap", gen.pf_cap), ("pf_ind", gen.pf_ind)):
            if not 0 < pf <= 1:
                found.append(Violation("positive", f"generator {gen.id}", f"{name} must lie in (0, 1]"))
    for res in case.res_units:
        if res.s_max <= 0:
            found.append(Violation("positive", f"RES {res.id}", "apparent-power cap must be positive"))
    for vsc in case.vscs:
        if vsc.i_max <= 0:
            found.append(Violation("positive", f"VSC {vsc.id}", "current cap must be positive"))
        if vsc.delta_max <= 0:
            found.append(Violation("positive", f"VSC {vsc.id}", "modulation cap must be positive"))
        if complex(vsc.r_tf, vsc.x_tf) == 0 or complex(vsc.r_c, vsc.x_c) == 0:
            found.append(Violation("positive", f"VSC {vsc.id}", "internal impedances must be non-zero"))
        if min(vsc.a1, vsc.a2, vsc.a3) < 0:
            found.append(Violation("positive", f"VSC {vsc.id}", "loss coefficients must be non-negative"))
    return found


def _references(case: NetworkCase) -> List[Violation]:
    found = []
    ac_ids = {n.id for n in case.ac_nodes}
    dc_ids = {n.id for n in case.dc_nodes}
    res_ids = {r.id for r in case.res_units}

    for branch in case.ac_branches:
        for end in (branch.from_node, branch.to_node):
            if end not in ac_ids:
                found.append(Violation("reference", f"AC branch {branch.id}", f"unknown AC node {end}"))
    for line in case.dc_lines:
        for end in (line.from_node, line.to_node):
            if end not in dc_ids:
                found.append(Violation("reference", f"DC line {line.id}", f"unknown DC node {end}"))
        if line.from_node == line.to_node:
            found.append(Violation("reference", f"DC line {line.id}", "line connects a node to itself"))
        if not line.closed and not line.switchable:
            found.append(Violation("reference", f"DC line {line.id}", "a normally open line must be switchable"))
    for gen in case.generators:
        if gen.node not in ac_ids:
            found.append(Violation("reference", f"generator {gen.id}", f"unknown AC node {gen.node}"))

    for vsc in case.vscs:
        sides = [s for s in (vsc.ac_node, vsc.res) if s is not None]
        if len(sides) != 1:
            found.append(Violation("vsc-reference", f"VSC {vsc.id}", "must reference exactly one AC-side system"))
        elif vsc.ac_node is not None and vsc.ac_node not in ac_ids:
            found.append(Violation("vsc-reference", f"VSC {vsc.id}", f"unknown AC node {vsc.ac_node}"))
        elif vsc.res is not None and vsc.res not in res_ids:
            found.append(Violation("vsc-reference", f"VSC {vsc.id}", f"unknown RES {vsc.res}"))
        if vsc.dc_node not in dc_ids:
            found.append(Violation("vsc-reference", f"VSC {vsc.id}", f"unknown DC node {vsc.dc_node}"))

    hosted = Counter(v.dc_node for v in case.vscs)
    for dc_node, count in sorted(hosted.items()):
        if count > 1:
            found.append(Violation("dc-node-vsc", f"DC node {dc_node}", f"hosts {count} VSCs, at most one allowed"))
    per_res = Counter(v.res for v in case.vscs if v.res is not None)
    for res_id, count in sorted(per_res.items()):
        if count > 1:
            found.append(Violation("vsc-reference", f"RES {res_id}", f"connected through {count} VSCs"))
    return found


def _slack(case: NetworkCase) -> List[Violation]:
    slack = [n.id for n in case.ac_nodes if n.slack]
    if len(slack) > 1:
        return [Violation("slack", "AC grid", f"multiple slack nodes {slack}")]
    return []


def _connectivity(case: NetworkCase) -> List[Violation]:
    found = []
    ac = nx.Graph()
    ac.add_nodes_from(n.id for n in case.ac_nodes)
    ac.add_edges_from((b.from_node, b.to_node) for b in case.ac_branches)
    if ac.number_of_nodes() and not nx.is_connected(ac):
        for component in sorted(nx.connected_components(ac), key=min)[1:]:
            found.append(Violation("connectivity", f"AC nodes {sorted(component)}", "not connected to the AC grid"))

    dc = nx.Graph()
    dc.add_nodes_from(n.id for n in case.dc_nodes)
    dc.add_edges_from((ln.from_node, ln.to_node) for ln in case.dc_lines)
    if dc.number_of_nodes() and not nx.is_connected(dc):
        for component in sorted(nx.connected_components(dc), key=min)[1:]:
            found.append(Violation("connectivity", f"DC nodes {sorted(component)}", "not connected to the DC grid"))
    return found


def validate_case(case: NetworkCase) -> ValidationReport:
    """Collect every invariant violation; the case is never modified"""
    violations: List[Violation] = []
    if not case.ac_nodes:
        violations.append(Violation("structure", "AC grid", "case has no AC nodes"))
    for items, label in ((case.ac_nodes, "AC node"), (case.ac_branches, "AC branch"),
                         (case.generators, "generator"), (case.res_units, "RES"),
                         (case.dc_nodes, "DC node"), (case.dc_lines, "DC line"), (case.vscs, "VSC")):
        violations.extend(_unique_ids(items, label))
    violations.extend(_bounds(case))
    violations.extend(_positivity(case))
    violations.extend(_references(case))
    violations.extend(_slack(case))
    violations.extend(_connectivity(case))
    return ValidationReport(violations)
