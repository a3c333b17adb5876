"""
Model blocks: AC grid, RES plants, MTDC grid, VSC stations and the objective
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from config import Config
from errors import FormulationError, LinearizationError
from formulation.program import ConicProgram, LinExpr, Variable, lin_sum
from grid.models import AC_SYSTEM, NetworkCase, res_system
from powerflow.linearization import OperatingPoint

FIRST_STAGE_KINDS = frozenset({"alpha", "pg", "qg", "pgsq"})
RES_LIMITS = ("cap", "ratio", "rated")


def _key_text(key) -> str:
    if isinstance(key, tuple):
        return ",".join(str(k) for k in key)
    return str(key)


class Scope:
    """Names variables and rows for one scenario copy of the model

    Variables whose (kind, key) is shared live once in the program and are
    reused by every scope that asks for them.
    """

    def __init__(self, program: ConicProgram, scenario: Optional[str] = None,
                 shared_kinds=frozenset(), shared_keys=frozenset(), weight: float = 1.0):
        self.program = program
        self.scenario = scenario
        self.shared_kinds = frozenset(shared_kinds)
        self.shared_keys = frozenset(shared_keys)
        self.weight = weight

    def is_shared(self, kind: str, key) -> bool:
        return kind in self.shared_kinds or (kind, key) in self.shared_keys

    def name(self, kind: str, key) -> str:
        base = f"{kind}[{_key_text(key)}]"
        if self.scenario is None or self.is_shared(kind, key):
            return base
        return f"{base}@{self.scenario}"

    def var(self, kind: str, key, lower: float = -math.inf, upper: float = math.inf,
            owner: str = "", binary: bool = False) -> Variable:
        name = self.name(kind, key)
        if name in self.program:
            return self.program.get(name)
        stage = "first" if self.is_shared(kind, key) and self.scenario is not None else "second"
        if kind in FIRST_STAGE_KINDS:
            stage = "first"
        return self.program.add_variable(name, lower, upper, binary=binary, owner=owner, stage=stage)

    def row(self, label: str, shared: bool = False) -> str:
        if shared or self.scenario is None:
            return label
        return f"{label}@{self.scenario}"

    def add(self, lhs, sense: str, rhs, label: str, block: str, shared: bool = False,
            rhs_param: Optional[str] = None, coeff_params: Optional[Dict[Variable, str]] = None):
        return self.program.add_constraint(lhs, sense, rhs, name=self.row(label, shared), block=block,
                                           rhs_param=rhs_param, exist_ok=shared, coeff_params=coeff_params)


def polygon_normals(segments: int) -> List[Tuple[float, float]]:
    """Cut normals (cos, sin) at n * pi / (2N), n = 0..N"""
    return [(math.cos(n * math.pi / (2 * segments)), math.sin(n * math.pi / (2 * segments)))
            for n in range(segments + 1)]


def add_polygon(scope: Scope, p, q, s_max: float, segments: int, label: str, block: str,
                shared: bool = False) -> None:
    for n, (c, s) in enumerate(polygon_normals(segments)):
        expr = float(c) * p + float(s) * q
        scope.add(expr, "<=", s_max, f"{label}:poly{n}+", block, shared)
        scope.add(expr, ">=", -s_max, f"{label}:poly{n}-", block, shared)


@dataclass
class BlockHandles:
    """Boundary triples (p, q, u) per VSC of the system the block models"""
    system: str
    boundary: Dict[int, Tuple[Variable, Variable, Variable]] = field(default_factory=dict)

    def names(self) -> List[str]:
        return [v.name for vsc_id in sorted(self.boundary) for v in self.boundary[vsc_id]]


def build_ac_block(scope: Scope, case: NetworkCase, op_point: OperatingPoint,
                   segments: Optional[int] = None) -> BlockHandles:
    """Linearized AC grid: branch flows, nodal balance, generation, caps, voltages"""
    segments = segments or Config.POLYGON_SEGMENTS
    owner = AC_SYSTEM
    block = "ac"
    if not op_point.coeffs:
        raise LinearizationError("operating point carries no linearization coefficients")

    slack_id = case.slack_node.id
    u = {n.id: scope.var("u", n.id, n.u_min, n.u_max, owner) for n in case.ac_nodes}
    theta = {
        n.id: scope.var("theta", n.id, 0.0 if n.id == slack_id else -math.pi,
                        0.0 if n.id == slack_id else math.pi, owner)
        for n in case.ac_nodes
    }

    flows_p: Dict[int, List[Variable]] = {n.id: [] for n in case.ac_nodes}
    flows_q: Dict[int, List[Variable]] = {n.id: [] for n in case.ac_nodes}
    for branch in case.ac_branches:
        coeffs = op_point.coeffs.get(branch.id)
        if coeffs is None:
            raise LinearizationError(f"missing linearization coefficients for AC branch {branch.id}")
        n_seg = branch.segments or segments
        for sending, receiving, fc in ((branch.from_node, branch.to_node, coeffs.forward),
                                       (branch.to_node, branch.from_node, coeffs.reverse)):
            key = (branch.id, sending)
            p = scope.var("pij", key, owner=owner)
            q = scope.var("qij", key, owner=owner)
            dtheta = theta[sending] - theta[receiving]
            cu_i, cu_j, ct, const = fc.p_terms()
            scope.add(p - cu_i * u[sending] - cu_j * u[receiving] - ct * dtheta, "==", const,
                      f"ac_flow_p[{_key_text(key)}]", block)
            cu_i, cu_j, ct, const = fc.q_terms()
            scope.add(q - cu_i * u[sending] - cu_j * u[receiving] - ct * dtheta, "==", const,
                      f"ac_flow_q[{_key_text(key)}]", block)
            add_polygon(scope, p, q, branch.s_max, n_seg, f"ac_cap[{_key_text(key)}]", block)
            flows_p[sending].append(p)
            flows_q[sending].append(q)

    gens_at: Dict[int, List[Tuple[Variable, Variable]]] = {n.id: [] for n in case.ac_nodes}
    for gen in case.generators:
        pg = scope.var("pg", gen.id, 0.0, gen.p_max, owner)
        qg = scope.var("qg", gen.id, owner=owner)
        shared = scope.is_shared("pg", gen.id)
        tan_cap = math.tan(math.acos(gen.pf_cap))
        tan_ind = math.tan(math.acos(gen.pf_ind))
        scope.add(qg - tan_ind * pg, "<=", 0.0, f"gen_pf_ind[{gen.id}]", block, shared)
        scope.add(qg + tan_cap * pg, ">=", 0.0, f"gen_pf_cap[{gen.id}]", block, shared)
        gens_at[gen.node].append((pg, qg))

    handles = BlockHandles(AC_SYSTEM)
    pcc = {v.ac_node: v for v in case.vscs_of(AC_SYSTEM)}
    for node in case.ac_nodes:
        injection_p = lin_sum(pg for pg, _ in gens_at[node.id])
        injection_q = lin_sum(qg for _, qg in gens_at[node.id])
        if node.id in pcc:
            vsc = pcc[node.id]
            pa2v = scope.var("pa2v", node.id, owner=owner)
            qa2v = scope.var("qa2v", node.id, owner=owner)
            injection_p = injection_p - pa2v
            injection_q = injection_q - qa2v
            handles.boundary[vsc.id] = (pa2v, qa2v, u[node.id])
        scope.add(injection_p - lin_sum(flows_p[node.id]) - node.g_sh * u[node.id], "==", node.load_p,
                  f"ac_balance_p[{node.id}]", block)
        scope.add(injection_q - lin_sum(flows_q[node.id]) + node.b_sh * u[node.id], "==", node.load_q,
                  f"ac_balance_q[{node.id}]", block)
    return handles


def build_res_block(scope: Scope, case: NetworkCase, res_id: int, p_available: float,
                    segments: Optional[int] = None, limit: str = "cap") -> BlockHandles:
    """RES plant with an available-power limit and an apparent-power capability

    limit "cap" bounds pr by the available power and caps (pr, qr) with the
    s_max polygon. "ratio" sets pr to a curtailed share of the available power.
    "rated" sizes the inverter cone at the available power instead of s_max.
    Only "cap" keeps the availability a pure right-hand side. In scenario
    copies the other two tag the availability as an uncertain parameter.
    """
    if limit not in RES_LIMITS:
        raise FormulationError(f"unknown RES limit '{limit}'; expected one of {', '.join(RES_LIMITS)}")
    segments = segments or Config.POLYGON_SEGMENTS
    res = case.res_unit(res_id)
    owner = res_system(res_id)
    block = "res"
    pr = scope.var("pr", res_id, 0.0, math.inf, owner)
    qr = scope.var("qr", res_id, owner=owner)
    param = f"pbar[{res_id}]"
    tagged = [param] if scope.scenario is not None else []
    if limit == "ratio":
        share = scope.var("gamma", res_id, 0.0, 1.0, owner)
        scope.add(pr - p_available * share, "==", 0.0, f"res_avail[{res_id}]", block,
                  coeff_params={share: p for p in tagged})
    else:
        scope.add(pr, "<=", p_available, f"res_avail[{res_id}]", block, rhs_param=param)
    if limit == "rated":
        scope.program.add_soc(p_available, [pr, qr], name=scope.row(f"res_rating[{res_id}]"), block=block,
                              tag="capability", params=tagged)
    else:
        add_polygon(scope, pr, qr, res.s_max, segments, f"res_cap[{res_id}]", block)

    pr2v = scope.var("pr2v", res_id, owner=owner)
    qr2v = scope.var("qr2v", res_id, owner=owner)
    ures = scope.var("ures", res_id, res.u_min, res.u_max, owner)
    scope.add(pr - pr2v, "==", 0.0, f"res_pass_p[{res_id}]", block)
    scope.add(qr - qr2v, "==", 0.0, f"res_pass_q[{res_id}]", block)

    handles = BlockHandles(owner)
    for vsc in case.vscs_of(owner):
        handles.boundary[vsc.id] = (pr2v, qr2v, ures)
    return handles


def active_dc_lines(case: NetworkCase, switching: bool):
    """Lines modeled in the MTDC block: all of them with switching, else the normally closed ones"""
    if switching:
        return list(case.dc_lines)
    return [line for line in case.dc_lines if line.closed]


def build_mtdc_block(scope: Scope, case: NetworkCase, switching: bool = True) -> Dict[int, Variable]:
    """DC network with SOC-relaxed line flows; optional topology binaries"""
    owner = "mtdc"
    block = "mtdc"
    big_m = case.big_m
    nodes = {n.id: n for n in case.dc_nodes}
    u = {n.id: scope.var("udc", n.id, n.u_min, n.u_max, owner) for n in case.dc_nodes}
    pm2v = {}
    for node in case.dc_nodes:
        if case.vsc_at_dc(node.id) is not None:
            pm2v[node.id] = scope.var("pm2v", node.id, owner=owner)

    outgoing: Dict[int, List[Variable]] = {n.id: [] for n in case.dc_nodes}
    for line in active_dc_lines(case, switching):
        i, j = line.from_node, line.to_node
        l_max = big_m ** 2 / min(nodes[i].u_min, nodes[j].u_min)
        pf = scope.var("pdc", (line.id, i), -big_m, big_m, owner)
        pt = scope.var("pdc", (line.id, j), -big_m, big_m, owner)
        lsq = scope.var("ldc", line.id, 0.0, l_max, owner)
        outgoing[i].append(pf)
        outgoing[j].append(pt)

        scope.add(pf + pt - line.r * lsq, "==", 0.0, f"dc_loss[{line.id}]", block)
        scope.program.add_rotated(lsq, u[i], [pf], name=scope.row(f"dc_cone[{line.id}]"), block=block)

        if not switching:
            scope.add(u[i] - u[j] - line.r * (pf - pt), "==", 0.0, f"dc_drop[{line.id}]", block)
            continue

        alpha = scope.var("alpha", line.id, 0.0, 1.0, owner, binary=True)
        for end, flow in ((i, pf), (j, pt)):
            scope.add(flow - big_m * alpha, "<=", 0.0, f"dc_gate[{line.id},{end}]+", block)
            scope.add(flow + big_m * alpha, ">=", 0.0, f"dc_gate[{line.id},{end}]-", block)

        b_aux = scope.var("bdc", line.id, 0.0, nodes[i].u_max, owner)
        t_aux = scope.var("tdc", line.id, 0.0, nodes[j].u_max, owner)
        scope.add((u[i] - b_aux) - (u[j] - t_aux) - line.r * (pf - pt), "==", 0.0,
                  f"dc_drop[{line.id}]", block)
        for aux, node, tag in ((b_aux, nodes[i], "b"), (t_aux, nodes[j], "t")):
            scope.add(aux + node.u_min * alpha, ">=", node.u_min, f"dc_aux[{line.id},{tag}]-", block)
            scope.add(aux + node.u_max * alpha, "<=", node.u_max, f"dc_aux[{line.id},{tag}]+", block)
        for aux, node, tag in ((b_aux, nodes[i], "b"), (t_aux, nodes[j], "t")):
            gap = u[node.id] - aux
            scope.add(gap - node.u_min * alpha, ">=", 0.0, f"dc_hull[{line.id},{tag}]-", block)
            scope.add(gap - node.u_max * alpha, "<=", 0.0, f"dc_hull[{line.id},{tag}]+", block)

    for node in case.dc_nodes:
        injection = -pm2v[node.id] if node.id in pm2v else LinExpr()
        scope.add(lin_sum(outgoing[node.id]) - injection, "==", 0.0, f"dc_balance[{node.id}]", block)
    return pm2v


def _vsc_admittance(vsc) -> np.ndarray:
    y_tf = 1.0 / complex(vsc.r_tf, vsc.x_tf)
    y_c = 1.0 / complex(vsc.r_c, vsc.x_c)
    return np.array([
        [y_tf, -y_tf, 0.0],
        [-y_tf, y_tf + y_c, -y_c],
        [0.0, -y_c, y_c],
    ], dtype=complex)


def build_vsc_block(scope: Scope, case: NetworkCase, vsc_id: int,
                    envelope: Optional[int] = None) -> Tuple[Variable, Variable, Variable]:
    """VSC station: s-f-c internal network, modulation cap, losses and current envelope

    Returns the (p, q, u) replica at the PCC side node s; p and q count power
    flowing from the AC-side system into the station as positive.
    """
    envelope = Config.ENVELOPE_SEGMENTS if envelope is None else envelope
    if envelope < 1:
        raise FormulationError(f"loss envelope needs at least one segment, got {envelope}")
    vsc = case.vsc(vsc_id)
    owner = f"vsc#{vsc_id}"
    block = "vsc"
    key = vsc_id

    names = ("s", "f", "c")
    c_diag = {k: scope.var(f"c{k}{k}", key, vsc.u_min, vsc.u_max, owner) for k in names}
    c_off = {}
    s_off = {}
    for a, b in (("s", "f"), ("f", "c")):
        c_off[(a, b)] = scope.var(f"c{a}{b}", key, -vsc.u_max, vsc.u_max, owner)
        s_off[(a, b)] = scope.var(f"s{a}{b}", key, -vsc.u_max, vsc.u_max, owner)
        scope.program.add_rotated(c_diag[a], c_diag[b], [c_off[(a, b)], s_off[(a, b)]],
                                  name=scope.row(f"vsc_w[{vsc_id},{a}{b}]"), block=block)

    def w_pair(a, b):
        if (a, b) in c_off:
            return c_off[(a, b)], s_off[(a, b)] * 1.0
        return c_off[(b, a)], -1.0 * s_off[(b, a)]

    ybus = _vsc_admittance(vsc)
    injections = {}
    for i, a in enumerate(names):
        p_expr = float(ybus[i, i].real) * c_diag[a]
        q_expr = float(-ybus[i, i].imag) * c_diag[a]
        for j, b in enumerate(names):
            if i == j or ybus[i, j] == 0:
                continue
            g, bb = float(ybus[i, j].real), float(ybus[i, j].imag)
            c_ab, s_ab = w_pair(a, b)
            p_expr = p_expr + g * c_ab + bb * s_ab
            q_expr = q_expr + g * s_ab - bb * c_ab
        injections[a] = (p_expr, q_expr)

    ps = scope.var("ps", key, owner=owner)
    qs = scope.var("qs", key, owner=owner)
    pc = scope.var("pc", key, owner=owner)
    qc = scope.var("qc", key, owner=owner)
    scope.add(injections["s"][0] - ps, "==", 0.0, f"vsc_node_p[{vsc_id},s]", block)
    scope.add(injections["s"][1] - qs, "==", 0.0, f"vsc_node_q[{vsc_id},s]", block)
    scope.add(injections["f"][0], "==", 0.0, f"vsc_node_p[{vsc_id},f]", block)
    scope.add(injections["f"][1] - vsc.b_f * c_diag["f"], "==", 0.0, f"vsc_node_q[{vsc_id},f]", block)
    scope.add(injections["c"][0] - pc, "==", 0.0, f"vsc_node_p[{vsc_id},c]", block)
    scope.add(injections["c"][1] - qc, "==", 0.0, f"vsc_node_q[{vsc_id},c]", block)

    udc = scope.var("udc", vsc.dc_node, owner="mtdc")
    pm2v = scope.var("pm2v", vsc.dc_node, owner="mtdc")
    scope.add(c_diag["c"] - vsc.delta_max ** 2 * udc, "<=", 0.0, f"vsc_modulation[{vsc_id}]", block)

    lc = scope.var("lc", key, 0.0, vsc.i_max ** 2, owner)
    ic = scope.var("ic", key, 0.0, vsc.i_max, owner)
    ploss = scope.var("ploss", key, owner=owner)
    scope.add(ploss - vsc.a1 * lc - vsc.a2 * ic, "==", vsc.a3, f"vsc_loss[{vsc_id}]", block)
    scope.add(pc - pm2v + ploss, "==", 0.0, f"vsc_power[{vsc_id}]", block)
    scope.program.add_rotated(lc, c_diag["c"], [pc, qc], name=scope.row(f"vsc_current[{vsc_id}]"), block=block)

    width = vsc.i_max / envelope
    pieces = []
    selectors = []
    upper_terms = LinExpr()
    for k in range(envelope):
        lo, hi = k * width, (k + 1) * width
        ik = scope.var("ik", (vsc_id, k), 0.0, hi, owner)
        bk = scope.var("bk", (vsc_id, k), 0.0, 1.0, owner, binary=True)
        scope.add(ik - lo * bk, ">=", 0.0, f"vsc_seg[{vsc_id},{k}]-", block)
        scope.add(ik - hi * bk, "<=", 0.0, f"vsc_seg[{vsc_id},{k}]+", block)
        upper_terms = upper_terms + (hi + lo) * ik - (hi * lo) * bk
        pieces.append(ik)
        selectors.append(bk)
    scope.add(lin_sum(selectors), "==", 1.0, f"vsc_seg_pick[{vsc_id}]", block)
    scope.add(ic - lin_sum(pieces), "==", 0.0, f"vsc_seg_sum[{vsc_id}]", block)
    scope.add(lc - upper_terms, "<=", 0.0, f"vsc_envelope[{vsc_id}]", block)
    scope.program.add_rotated(lc, 1.0, pieces, name=scope.row(f"vsc_envelope_cone[{vsc_id}]"),
                              block=block, tag="envelope")
    return ps, qs, c_diag["s"]


def add_generation_objective(scope: Scope, case: NetworkCase, weight: float = 1.0) -> None:
    """Generation cost plus generation minus load (the AC-grid share of losses)"""
    program = scope.program
    for gen in case.generators:
        if gen.c1 < 0:
            raise FormulationError(f"generator {gen.id} has negative quadratic cost {gen.c1}")
        pg = scope.var("pg", gen.id, 0.0, gen.p_max, AC_SYSTEM)
        terms = (gen.c2 + 1.0) * pg + gen.c3
        if gen.c1 > 0:
            name = scope.name("pgsq", gen.id)
            fresh = name not in program
            epi = scope.var("pgsq", gen.id, 0.0, math.inf, AC_SYSTEM)
            if fresh:
                program.add_rotated(epi, 1.0, [pg], name=f"gen_cost_cone[{name}]", block="objective",
                                    tag="epigraph")
            terms = terms + gen.c1 * epi
        program.add_objective(weight * terms)
    program.add_objective(-weight * sum(n.load_p for n in case.ac_nodes))


def add_res_objective(scope: Scope, res_id: int, weight: float = 1.0) -> None:
    pr = scope.var("pr", res_id, 0.0, math.inf, res_system(res_id))
    scope.program.add_objective(weight * pr)


def build_objective(scope: Scope, case: NetworkCase, weight: float = 1.0) -> None:
    """Generation cost plus total losses: sum(cost) + sum(pG) - sum(pL) + sum(pR)"""
    add_generation_objective(scope, case, weight)
    for res in case.res_units:
        add_res_objective(scope, res.id, weight)
