"""
Network case models for the AC/MTDC grid
"""
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

AC_SYSTEM = "ac"


def res_system(res_id: int) -> str:
    return f"res#{res_id}"


@dataclass(frozen=True)
class CaseBase:
    s_mva: float = 100.0
    v_kv: float = 345.0

    @property
    def z_ohm(self) -> float:
        return self.v_kv ** 2 / self.s_mva

    @property
    def i_ka(self) -> float:
        return self.s_mva / (3 ** 0.5 * self.v_kv)


@dataclass(frozen=True)
class AcNode:
    id: int
    v_min: float = 0.955
    v_max: float = 1.045
    load_p: float = 0.0
    load_q: float = 0.0
    g_sh: float = 0.0
    b_sh: float = 0.0
    slack: bool = False

    @property
    def u_min(self) -> float:
        return self.v_min ** 2

    @property
    def u_max(self) -> float:
        return self.v_max ** 2


@dataclass(frozen=True)
class AcBranch:
    id: int
    from_node: int
    to_node: int
    g: float
    b: float
    s_max: float = 1.0
    segments: Optional[int] = None  # polygon N, falls back to Config


@dataclass(frozen=True)
class Generator:
    id: int
    node: int
    p_max: float
    p_base: float = 0.0
    pf_cap: float = 0.9
    pf_ind: float = 0.9
    c1: float = 0.0
    c2: float = 0.0
    c3: float = 0.0


@dataclass(frozen=True)
class ResUnit:
    id: int
    s_max: float
    p_low: float
    p_high: float
    v_min: float = 0.955
    v_max: float = 1.045

    @property
    def u_min(self) -> float:
        return self.v_min ** 2

    @property
    def u_max(self) -> float:
        return self.v_max ** 2


@dataclass(frozen=True)
class DcNode:
    id: int
    v_min: float = 0.955
    v_max: float = 1.045

    @property
    def u_min(self) -> float:
        return self.v_min ** 2

    @property
    def u_max(self) -> float:
        return self.v_max ** 2


@dataclass(frozen=True)
class DcLine:
    id: int
    from_node: int
    to_node: int
    r: float
    switchable: bool = False
    closed: bool = True

    @property
    def key(self) -> Tuple[int, int]:
        return (self.from_node, self.to_node)


@dataclass(frozen=True)
class VscStation:
    id: int
    dc_node: int
    ac_node: Optional[int] = None
    res: Optional[int] = None
    b_f: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    a3: float = 0.0
    i_max: float = 1.0
    delta_max: float = 1.0
    r_tf: float = 0.001
    x_tf: float = 0.01
    r_c: float = 0.001
    x_c: float = 0.01
    v_min: float = 0.955
    v_max: float = 1.045

    @property
    def system(self) -> str:
        if self.res is not None:
            return res_system(self.res)
        return AC_SYSTEM

    @property
    def u_min(self) -> float:
        return self.v_min ** 2

    @property
    def u_max(self) -> float:
        return self.v_max ** 2


@dataclass(frozen=True)
class NetworkCase:
    name: str
    base: CaseBase
    ac_nodes: Tuple[AcNode, ...]
    ac_branches: Tuple[AcBranch, ...]
    generators: Tuple[Generator, ...]
    res_units: Tuple[ResUnit, ...]
    dc_nodes: Tuple[DcNode, ...]
    dc_lines: Tuple[DcLine, ...]
    vscs: Tuple[VscStation, ...]
    notes: str = ""

    def ac_node(self, node_id: int) -> AcNode:
        return self._lookup(self.ac_nodes, node_id, "AC node")

    def dc_node(self, node_id: int) -> DcNode:
        return self._lookup(self.dc_nodes, node_id, "DC node")

    def res_unit(self, res_id: int) -> ResUnit:
        return self._lookup(self.res_units, res_id, "RES unit")

    def vsc(self, vsc_id: int) -> VscStation:
        return self._lookup(self.vscs, vsc_id, "VSC")

    @staticmethod
    def _lookup(items, item_id, label):
        for item in items:
            if item.id == item_id:
                return item
        raise KeyError(f"{label} {item_id} not found")

    @property
    def slack_node(self) -> AcNode:
        for node in self.ac_nodes:
            if node.slack:
                return node
        return self.ac_nodes[0]

    @property
    def systems(self) -> List[str]:
        """AC-side systems: the AC grid followed by one system per RES unit"""
        return [AC_SYSTEM] + [res_system(r.id) for r in self.res_units]

    def vscs_of(self, system: str) -> List[VscStation]:
        return [v for v in self.vscs if v.system == system]

    def vsc_at_dc(self, dc_node: int) -> Optional[VscStation]:
        for vsc in self.vscs:
            if vsc.dc_node == dc_node:
                return vsc
        return None

    @property
    def uncertainty_boxes(self) -> Dict[int, Tuple[float, float]]:
        return {r.id: (r.p_low, r.p_high) for r in self.res_units}

    @property
    def big_m(self) -> float:
        """Total rated VSC power, the flow bound gating open DC lines"""
        return sum(v.i_max * (v.u_max ** 0.5) for v in self.vscs)

    def with_overrides(self, **changes) -> "NetworkCase":
        return replace(self, **changes)

    def with_dc_voltage(self, v_min: float, v_max: float) -> "NetworkCase":
        nodes = tuple(replace(n, v_min=v_min, v_max=v_max) for n in self.dc_nodes)
        return replace(self, dc_nodes=nodes)


@dataclass
class Violation:
    rule: str
    element: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.element}: {self.message}"

    def to_dict(self) -> dict:
        return {"rule": self.rule, "element": self.element, "message": self.message}


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]

    def to_dict(self) -> dict:
        return {"valid": self.valid, "violations": [v.to_dict() for v in self.violations]}
