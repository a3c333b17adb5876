"""
Successive linear approximation of AC branch flows

Branch flows in (u, theta) with u = v^2:
    p_ij = g u_i - sqrt(u_i u_j) (g cos t + b sin t)
    q_ij = -b u_i - sqrt(u_i u_j) (g sin t - b cos t)
are replaced by their first-order expansion at an operating point, arranged as
    p_ij ~ g u_i - gP (u_i + u_j)/2 - bP (t - t_k) - gS * vS
    q_ij ~ -b u_i - bQ (u_i + u_j)/2 - gQ (t - t_k) - bQ * vS
with the cross term vS = v_ijL_S * (u_i - u_j).
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from errors import LinearizationError, PowerFlowError
from grid.models import NetworkCase
from powerflow.newton import NodalInjections, solve_power_flow


def branch_flows(u_i: float, u_j: float, theta_ij: float, g: float, b: float) -> Tuple[float, float]:
    """Exact sending-end flows of a series branch"""
    w = np.sqrt(u_i * u_j)
    p = g * u_i - w * (g * np.cos(theta_ij) + b * np.sin(theta_ij))
    q = -b * u_i - w * (g * np.sin(theta_ij) - b * np.cos(theta_ij))
    return float(p), float(q)


@dataclass(frozen=True)
class FlowCoefficients:
    g: float
    b: float
    theta_k: float
    gP: float
    bP: float
    gQ: float
    bQ: float
    gS: float
    v_ijL_S: float

    def p(self, u_i, u_j, theta_ij):
        v_s = self.v_ijL_S * (u_i - u_j)
        return self.g * u_i - self.gP * (u_i + u_j) / 2 - self.bP * (theta_ij - self.theta_k) - self.gS * v_s

    def q(self, u_i, u_j, theta_ij):
        v_s = self.v_ijL_S * (u_i - u_j)
        return -self.b * u_i - self.bQ * (u_i + u_j) / 2 - self.gQ * (theta_ij - self.theta_k) - self.bQ * v_s

    def p_terms(self) -> Tuple[float, float, float, float]:
        """(coef u_i, coef u_j, coef theta_ij, constant) of the linear p model"""
        cu_i = self.g - self.gP / 2 - self.gS * self.v_ijL_S
        cu_j = -self.gP / 2 + self.gS * self.v_ijL_S
        return cu_i, cu_j, -self.bP, self.bP * self.theta_k

    def q_terms(self) -> Tuple[float, float, float, float]:
        cu_i = -self.b - self.bQ / 2 - self.bQ * self.v_ijL_S
        cu_j = -self.bQ / 2 + self.bQ * self.v_ijL_S
        return cu_i, cu_j, -self.gQ, self.gQ * self.theta_k


def flow_coefficients(u_i: float, u_j: float, theta_ij: float, g: float, b: float) -> FlowCoefficients:
    if u_i <= 0 or u_j <= 0:
        raise LinearizationError(f"expansion point needs positive u, got u_i={u_i}, u_j={u_j}")
    c = g * np.cos(theta_ij) + b * np.sin(theta_ij)
    d = -g * np.sin(theta_ij) + b * np.cos(theta_ij)
    e = g * np.sin(theta_ij) - b * np.cos(theta_ij)
    w = np.sqrt(u_i * u_j)
    r_ji = np.sqrt(u_j / u_i)
    r_ij = np.sqrt(u_i / u_j)
    m = (r_ji + r_ij) / 2
    kappa = (r_ji - r_ij) / (2 * (r_ji + r_ij))
    return FlowCoefficients(
        g=g, b=b, theta_k=float(theta_ij),
        gP=float(c * m), bP=float(w * d),
        gQ=float(w * c), bQ=float(e * m),
        gS=float(c * m), v_ijL_S=float(kappa),
    )


@dataclass(frozen=True)
class BranchCoefficients:
    branch_id: int
    from_node: int
    to_node: int
    forward: FlowCoefficients
    reverse: FlowCoefficients


@dataclass
class OperatingPoint:
    node_ids: Tuple[int, ...]
    u: np.ndarray
    theta: np.ndarray
    residual: float
    iterations: int = 0
    injections: Optional[NodalInjections] = None
    coeffs: Dict[int, BranchCoefficients] = field(default_factory=dict)

    def index(self, node_id: int) -> int:
        return self.node_ids.index(node_id)

    def u_of(self, node_id: int) -> float:
        return float(self.u[self.index(node_id)])

    def theta_of(self, node_id: int) -> float:
        return float(self.theta[self.index(node_id)])


def linearize(op_point: OperatingPoint, case: NetworkCase) -> Dict[int, BranchCoefficients]:
    """Per-branch coefficients of the first-order flow model at op_point"""
    if np.any(op_point.u <= 0):
        raise LinearizationError("expansion point has a non-positive squared voltage")
    coeffs = {}
    for branch in case.ac_branches:
        u_i, u_j = op_point.u_of(branch.from_node), op_point.u_of(branch.to_node)
        theta_ij = op_point.theta_of(branch.from_node) - op_point.theta_of(branch.to_node)
        coeffs[branch.id] = BranchCoefficients(
            branch_id=branch.id,
            from_node=branch.from_node,
            to_node=branch.to_node,
            forward=flow_coefficients(u_i, u_j, theta_ij, branch.g, branch.b),
            reverse=flow_coefficients(u_j, u_i, -theta_ij, branch.g, branch.b),
        )
    return coeffs


def evaluate_linear_flows(coeffs: Dict[int, BranchCoefficients], u: Dict[int, float],
                          theta: Dict[int, float]) -> Dict[Tuple[int, int], Tuple[float, float]]:
    """Linear-model (p, q) for both directions of every branch"""
    flows = {}
    for bc in coeffs.values():
        i, j = bc.from_node, bc.to_node
        t = theta[i] - theta[j]
        flows[(bc.branch_id, i)] = (bc.forward.p(u[i], u[j], t), bc.forward.q(u[i], u[j], t))
        flows[(bc.branch_id, j)] = (bc.reverse.p(u[j], u[i], -t), bc.reverse.q(u[j], u[i], -t))
    return flows


def solve_base_power_flow(case: NetworkCase, injections: Optional[NodalInjections] = None) -> OperatingPoint:
    """Converged nonlinear power flow plus its linearization"""
    injections = injections or NodalInjections.from_case(case)
    result = solve_power_flow(case, injections)
    point = OperatingPoint(
        node_ids=tuple(n.id for n in case.ac_nodes),
        u=result.u,
        theta=result.theta,
        residual=result.residual,
        iterations=result.iterations,
        injections=injections,
    )
    point.coeffs = linearize(point, case)
    return point


@dataclass
class UpdateResult:
    point: OperatingPoint
    accuracy: Optional[float]
    u_nonlin: Optional[np.ndarray] = None
    error: Optional[str] = None

    @property
    def updated(self) -> bool:
        return self.error is None


def update_operating_point(prev: OperatingPoint, injections: NodalInjections,
                           case: NetworkCase) -> UpdateResult:
    """Re-solve the nonlinear flow under an OPF's injections and re-linearize"""
    if prev.injections is not None and injections.same_as(prev.injections):
        accuracy = None
        if injections.u_lin is not None:
            accuracy = float(np.max(np.abs(injections.u_lin - prev.u)))
        return UpdateResult(point=prev, accuracy=accuracy, u_nonlin=prev.u.copy())
    try:
        point = solve_base_power_flow(case, injections)
    except PowerFlowError as e:
        logger.warning(f"Operating point update failed, keeping previous point: {e}")
        return UpdateResult(point=prev, accuracy=None, error=str(e))

    accuracy = None
    if injections.u_lin is not None:
        accuracy = float(np.max(np.abs(injections.u_lin - point.u)))
        logger.info(f"Linearization accuracy max|u_lin - u_nonlin| = {accuracy:.3e}")
    return UpdateResult(point=point, accuracy=accuracy, u_nonlin=point.u.copy())


def voltage_rows(case: NetworkCase, round_index: int, u_lin: np.ndarray, u_nonlin: np.ndarray) -> List[dict]:
    return [
        {"round": round_index, "node": n.id, "u_lin": float(u_lin[k]), "u_nonlin": float(u_nonlin[k]),
         "abs_error": float(abs(u_lin[k] - u_nonlin[k]))}
        for k, n in enumerate(case.ac_nodes)
    ]


@dataclass
class AccuracyStudy:
    errors: List[Optional[float]] = field(default_factory=list)
    rows: List[dict] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)

    @property
    def final_error(self) -> Optional[float]:
        return self.errors[-1] if self.errors else None

    def non_increasing(self, tol: float = 1e-9) -> bool:
        values = [e for e in self.errors if e is not None]
        return all(b <= a + tol for a, b in zip(values, values[1:]))

    def to_dict(self) -> dict:
        return {"errors": list(self.errors), "failures": list(self.failures)}


def accuracy_study(case: NetworkCase, rounds: int,
                   solve_fn: Callable[[OperatingPoint], NodalInjections],
                   op_point: Optional[OperatingPoint] = None) -> AccuracyStudy:
    """rounds + 1 OPF solves, re-linearizing after each one

    solve_fn maps an operating point to the OPF's nodal injections, carrying
    the linear-model voltages in u_lin.
    """
    if rounds < 0:
        raise LinearizationError(f"update rounds must be non-negative, got {rounds}")
    point = op_point or solve_base_power_flow(case)
    study = AccuracyStudy()
    for round_index in range(rounds + 1):
        injections = solve_fn(point)
        result = update_operating_point(point, injections, case)
        study.errors.append(result.accuracy)
        if not result.updated:
            study.failures.append(f"round {round_index}: {result.error}")
        elif result.u_nonlin is not None and injections.u_lin is not None:
            study.rows.extend(voltage_rows(case, round_index, injections.u_lin, result.u_nonlin))
        logger.debug(f"SLA round {round_index}: error {result.accuracy}")
        point = result.point
    return study
