"""
Mixed-binary conic program representation

Variables carry bounds, a binary flag and an owner block. Constraints are
linear rows; cones are second-order (||x|| <= t) or rotated (||x||^2 <= y z,
with y, z >= 0). Every row and cone is labeled with the block it belongs to.
"""
import copy
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ModelError

Number = Union[int, float]

SENSES = ("==", "<=", ">=")
CONE_KINDS = ("soc", "rotated")
CONE_TAGS = ("relaxation", "epigraph", "envelope", "capability")


class _Arith:
    # numpy scalars defer to our reflected operators
    __array_ufunc__ = None

    def as_expr(self) -> "LinExpr":
        raise NotImplementedError

    def __add__(self, other):
        return self.as_expr()._combine(other, 1.0)

    def __radd__(self, other):
        return self.as_expr()._combine(other, 1.0)

    def __sub__(self, other):
        return self.as_expr()._combine(other, -1.0)

    def __rsub__(self, other):
        return (-self.as_expr())._combine(other, 1.0)

    def __mul__(self, scalar):
        if not isinstance(scalar, (int, float, np.floating)):
            return NotImplemented
        expr = self.as_expr()
        return LinExpr({k: v * scalar for k, v in expr.terms.items()}, expr.constant * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __truediv__(self, scalar):
        return self * (1.0 / scalar)


@dataclass(eq=False)
class Variable(_Arith):
    index: int
    name: str
    lower: float
    upper: float
    binary: bool = False
    owner: str = ""
    stage: str = "second"

    def as_expr(self) -> "LinExpr":
        return LinExpr({self.index: 1.0})


class LinExpr(_Arith):
    __slots__ = ("terms", "constant")

    def __init__(self, terms: Optional[Dict[int, float]] = None, constant: float = 0.0):
        self.terms = dict(terms or {})
        self.constant = float(constant)

    def as_expr(self) -> "LinExpr":
        return self

    def _combine(self, other, sign: float) -> "LinExpr":
        terms = dict(self.terms)
        constant = self.constant
        if isinstance(other, (int, float, np.floating)):
            constant += sign * float(other)
        else:
            other = other.as_expr()
            for k, v in other.terms.items():
                terms[k] = terms.get(k, 0.0) + sign * v
            constant += sign * other.constant
        return LinExpr(terms, constant)

    def value(self, x: np.ndarray) -> float:
        return float(sum(c * x[k] for k, c in self.terms.items()) + self.constant)

    def __repr__(self) -> str:
        return f"LinExpr({self.terms}, {self.constant})"


def as_expr(value) -> LinExpr:
    if isinstance(value, (int, float, np.floating)):
        return LinExpr({}, float(value))
    return value.as_expr()


def lin_sum(items: Iterable) -> LinExpr:
    total = LinExpr()
    for item in items:
        total = total + item
    return total


@dataclass
class Constraint:
    name: str
    block: str
    terms: Dict[int, float]
    sense: str
    rhs: float
    rhs_param: Optional[str] = None
    # variable index -> uncertain parameter used as its coefficient
    param_terms: Dict[int, str] = field(default_factory=dict)
    products: List[Tuple[int, int, float]] = field(default_factory=list)

    def activity(self, x: np.ndarray) -> float:
        return float(sum(c * x[k] for k, c in self.terms.items()))

    def violation(self, x: np.ndarray) -> float:
        lhs = self.activity(x)
        if self.sense == "==":
            return abs(lhs - self.rhs)
        if self.sense == "<=":
            return max(0.0, lhs - self.rhs)
        return max(0.0, self.rhs - lhs)


@dataclass
class Cone:
    """soc: ||body|| <= head[0]; rotated: ||body||^2 <= head[0] * head[1]"""
    name: str
    block: str
    kind: str
    head: List[LinExpr]
    body: List[LinExpr]
    tag: str = "relaxation"
    params: List[str] = field(default_factory=list)

    def slack(self, x: np.ndarray) -> float:
        body = np.array([e.value(x) for e in self.body])
        if self.kind == "soc":
            return self.head[0].value(x) - float(np.linalg.norm(body))
        return self.head[0].value(x) * self.head[1].value(x) - float(body @ body)

    def scale(self, x: np.ndarray) -> float:
        if self.kind == "soc":
            return max(1.0, abs(self.head[0].value(x)))
        return max(1.0, abs(self.head[0].value(x) * self.head[1].value(x)))

    def variables(self) -> set:
        found = set()
        for expr in list(self.head) + list(self.body):
            found.update(expr.terms)
        return found


class ConicProgram:
    def __init__(self, name: str = "program"):
        self.name = name
        self.variables: List[Variable] = []
        self.constraints: List[Constraint] = []
        self.cones: List[Cone] = []
        self.objective = LinExpr()
        self.parameters: Dict[str, float] = {}
        self.boundary: Dict[str, List[str]] = {}
        self._by_name: Dict[str, Variable] = {}
        self._rows: Dict[str, int] = {}
        self._cone_names: set = set()

    # variables

    def add_variable(self, name: str, lower: float = -math.inf, upper: float = math.inf,
                     binary: bool = False, owner: str = "", stage: str = "second") -> Variable:
        if name in self._by_name:
            raise ModelError(f"variable '{name}' declared twice")
        if binary:
            lower, upper = max(0.0, lower), min(1.0, upper)
        if lower > upper:
            raise ModelError(f"variable '{name}' has lower bound {lower} above upper bound {upper}")
        var = Variable(len(self.variables), name, float(lower), float(upper), binary, owner, stage)
        self.variables.append(var)
        self._by_name[name] = var
        return var

    def get(self, name: str) -> Variable:
        try:
            return self._by_name[name]
        except KeyError:
            raise ModelError(f"unknown variable '{name}'") from None

    def has(self, name: str) -> bool:
        return name in self._by_name

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    @property
    def n(self) -> int:
        return len(self.variables)

    def binaries(self) -> np.ndarray:
        return np.array([v.index for v in self.variables if v.binary], dtype=int)

    def bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.array([v.lower for v in self.variables], dtype=float)
        upper = np.array([v.upper for v in self.variables], dtype=float)
        return lower, upper

    def names(self) -> List[str]:
        return [v.name for v in self.variables]

    # constraints

    def add_constraint(self, lhs, sense: str, rhs=0.0, name: str = "", block: str = "",
                       rhs_param: Optional[str] = None, exist_ok: bool = False,
                       coeff_params: Optional[Dict[Variable, str]] = None,
                       products: Sequence[Tuple[Variable, Variable, float]] = ()) -> Optional[Constraint]:
        """Add lhs (sense) rhs; constants on either side move to the right-hand side

        coeff_params names the uncertain parameter behind a variable's coefficient;
        products lists bilinear terms c * x * y, which no backend accepts.
        """
        if sense not in SENSES:
            raise ModelError(f"unknown constraint sense '{sense}'")
        name = name or f"c{len(self.constraints)}"
        if name in self._rows:
            if exist_ok:
                return None
            raise ModelError(f"constraint '{name}' declared twice")
        expr = as_expr(lhs) - as_expr(rhs)
        terms = {k: v for k, v in expr.terms.items() if v != 0.0}
        self._check_indices(terms, name)
        row = Constraint(name=name, block=block, terms=terms, sense=sense, rhs=-expr.constant,
                         rhs_param=rhs_param,
                         param_terms={var.index: param for var, param in (coeff_params or {}).items()},
                         products=[(x.index, y.index, float(c)) for x, y, c in products])
        self._check_indices(row.param_terms, name)
        self._rows[name] = len(self.constraints)
        self.constraints.append(row)
        return row

    def constraint(self, name: str) -> Constraint:
        try:
            return self.constraints[self._rows[name]]
        except KeyError:
            raise ModelError(f"unknown constraint '{name}'") from None

    def set_rhs(self, name: str, value: float) -> None:
        self.constraint(name).rhs = float(value)

    def add_cone(self, kind: str, head: Sequence, body: Sequence, name: str = "", block: str = "",
                 tag: str = "relaxation", params: Sequence[str] = ()) -> Cone:
        if kind not in CONE_KINDS:
            raise ModelError(f"unknown cone kind '{kind}'")
        if tag not in CONE_TAGS:
            raise ModelError(f"unknown cone tag '{tag}'")
        expected = 1 if kind == "soc" else 2
        if len(head) != expected:
            raise ModelError(f"{kind} cone needs {expected} head expression(s)")
        name = name or f"k{len(self.cones)}"
        if name in self._cone_names:
            raise ModelError(f"cone '{name}' declared twice")
        cone = Cone(name, block, kind, [as_expr(h) for h in head], [as_expr(b) for b in body], tag, list(params))
        for expr in cone.head + cone.body:
            self._check_indices(expr.terms, name)
        self._cone_names.add(name)
        self.cones.append(cone)
        return cone

    def add_soc(self, t, body: Sequence, name: str = "", block: str = "", tag: str = "relaxation",
                params: Sequence[str] = ()) -> Cone:
        return self.add_cone("soc", [t], body, name, block, tag, params)

    def add_rotated(self, y, z, body: Sequence, name: str = "", block: str = "",
                    tag: str = "relaxation", params: Sequence[str] = ()) -> Cone:
        return self.add_cone("rotated", [y, z], body, name, block, tag, params)

    def add_objective(self, expr) -> None:
        self.objective = self.objective + expr

    def _check_indices(self, terms: Dict[int, float], where: str) -> None:
        for k in terms:
            if not 0 <= k < len(self.variables):
                raise ModelError(f"'{where}' references undeclared variable index {k}")

    # derived programs

    def copy(self) -> "ConicProgram":
        return copy.deepcopy(self)

    def fix(self, name: str, value: float) -> "ConicProgram":
        """Copy with one variable pinned through its bounds"""
        return self.with_bounds({name: (value, value)})

    def with_bounds(self, bounds: Dict[str, Tuple[float, float]]) -> "ConicProgram":
        clone = self.copy()
        for name, (lower, upper) in bounds.items():
            var = clone.get(name)
            var.lower, var.upper = float(lower), float(upper)
        return clone

    def free_binaries(self) -> List[Variable]:
        return [v for v in self.variables if v.binary and v.lower != v.upper]

    # checks

    def evaluate(self, x: np.ndarray) -> float:
        return self.objective.value(x)

    def max_violation(self, x: np.ndarray) -> float:
        worst = 0.0
        lower, upper = self.bounds()
        worst = max(worst, float(np.max(np.maximum(lower - x, 0.0), initial=0.0)))
        worst = max(worst, float(np.max(np.maximum(x - upper, 0.0), initial=0.0)))
        for row in self.constraints:
            worst = max(worst, row.violation(x))
        for cone in self.cones:
            worst = max(worst, -cone.slack(x))
        return worst

    def summary(self) -> Dict[str, int]:
        return {
            "variables": self.n,
            "binaries": len(self.binaries()),
            "constraints": len(self.constraints),
            "cones": len(self.cones),
        }

    # text interchange format

    def to_text(self) -> str:
        """Line-oriented dump: VAR, CON, SOC, RSOC and OBJ records"""
        def fmt(x: float) -> str:
            return repr(float(x))

        def expr_text(expr: LinExpr) -> str:
            parts = [f"{fmt(c)} {self.variables[k].name}" for k, c in sorted(expr.terms.items())]
            if expr.constant or not parts:
                parts.append(fmt(expr.constant))
            return " + ".join(parts)

        lines = [f"# conic program '{self.name}' format 1"]
        for v in self.variables:
            kind = "bin" if v.binary else "cont"
            lines.append(f"VAR {v.name} {kind} {fmt(v.lower)} {fmt(v.upper)} owner={v.owner} stage={v.stage}")
        for row in self.constraints:
            param = f" param={row.rhs_param}" if row.rhs_param else ""
            param += "".join(f" coeff[{self.variables[k].name}]={p}" for k, p in sorted(row.param_terms.items()))
            lhs = " + ".join(f"{fmt(c)} {self.variables[k].name}" for k, c in sorted(row.terms.items())) or "0"
            lines.append(f"CON {row.name} block={row.block}{param} : {lhs} {row.sense} {fmt(row.rhs)}")
        for cone in self.cones:
            record = "SOC" if cone.kind == "soc" else "RSOC"
            head = " ; ".join(expr_text(h) for h in cone.head)
            body = " ; ".join(expr_text(b) for b in cone.body)
            params = f" params={','.join(cone.params)}" if cone.params else ""
            lines.append(f"{record} {cone.name} block={cone.block} tag={cone.tag}{params} : {head} | {body}")
        lines.append(f"OBJ min {expr_text(self.objective)}")
        return "\n".join(lines) + "\n"
