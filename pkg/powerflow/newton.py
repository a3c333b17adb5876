"""
Polar Newton-Raphson AC power flow (slack + PQ nodes)
"""
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from loguru import logger
from scipy.sparse import csr_matrix, diags, hstack, lil_matrix, vstack
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from config import Config
from errors import ConvergenceError, SingularJacobianError
from grid.models import NetworkCase


@dataclass
class NodalInjections:
    """Net injections per AC node, in case node order"""
    p: np.ndarray
    q: np.ndarray
    slack_voltage: float = 1.0
    u_lin: Optional[np.ndarray] = None  # linear-model voltages that produced these injections

    @classmethod
    def from_case(cls, case: NetworkCase) -> "NodalInjections":
        """Base-case injections: generator set points minus loads"""
        index = {n.id: k for k, n in enumerate(case.ac_nodes)}
        p = np.array([-n.load_p for n in case.ac_nodes], dtype=float)
        q = np.array([-n.load_q for n in case.ac_nodes], dtype=float)
        for gen in case.generators:
            p[index[gen.node]] += gen.p_base
        return cls(p=p, q=q)

    def same_as(self, other: "NodalInjections") -> bool:
        return (np.array_equal(self.p, other.p) and np.array_equal(self.q, other.q)
                and self.slack_voltage == other.slack_voltage)


@dataclass
class PowerFlowResult:
    v: np.ndarray
    theta: np.ndarray
    iterations: int
    residual: float
    trace: List[float] = field(default_factory=list)

    @property
    def u(self) -> np.ndarray:
        return self.v ** 2


def build_ybus(case: NetworkCase) -> csr_matrix:
    """Nodal admittance matrix from series branch admittances and nodal shunts"""
    index = {n.id: k for k, n in enumerate(case.ac_nodes)}
    n = len(case.ac_nodes)
    ybus = lil_matrix((n, n), dtype=complex)
    for branch in case.ac_branches:
        i, j = index[branch.from_node], index[branch.to_node]
        y = complex(branch.g, branch.b)
        ybus[i, i] += y
        ybus[j, j] += y
        ybus[i, j] -= y
        ybus[j, i] -= y
    for k, node in enumerate(case.ac_nodes):
        ybus[k, k] += complex(node.g_sh, node.b_sh)
    return ybus.tocsr()


def dsbus_dv(ybus: csr_matrix, voltage: np.ndarray):
    """Partial derivatives of complex injections w.r.t. magnitude and angle"""
    current = ybus @ voltage
    diag_v = diags(voltage)
    diag_i = diags(current)
    diag_vnorm = diags(voltage / np.abs(voltage))
    ds_dvm = diag_v @ (ybus @ diag_vnorm).conj() + diag_i.conj() @ diag_vnorm
    ds_dva = 1j * diag_v @ (diag_i - ybus @ diag_v).conj()
    return csr_matrix(ds_dvm), csr_matrix(ds_dva)


def newton_raphson(ybus: csr_matrix, s_spec: np.ndarray, slack: int, v_slack: float = 1.0,
                   tol: Optional[float] = None, max_iter: Optional[int] = None) -> PowerFlowResult:
    """Flat-start Newton iterations; every non-slack node is PQ"""
    tol = Config.NEWTON_TOL if tol is None else tol
    max_iter = Config.NEWTON_MAX_ITER if max_iter is None else max_iter

    n = ybus.shape[0]
    pq = np.array([k for k in range(n) if k != slack], dtype=int)
    vm = np.ones(n)
    va = np.zeros(n)
    vm[slack] = v_slack
    voltage = vm * np.exp(1j * va)

    def mismatch(v):
        s_calc = v * np.conj(ybus @ v)
        diff = s_calc - s_spec
        return np.concatenate([diff[pq].real, diff[pq].imag])

    f = mismatch(voltage)
    residual = float(np.max(np.abs(f))) if f.size else 0.0
    trace = [residual]
    iterations = 0
    while residual > tol:
        if iterations >= max_iter:
            raise ConvergenceError(
                f"Newton power flow did not converge in {max_iter} iterations (mismatch {residual:.3e})",
                trace=trace,
            )
        ds_dvm, ds_dva = dsbus_dv(ybus, voltage)
        j11 = ds_dva[pq][:, pq].real
        j12 = ds_dvm[pq][:, pq].real
        j21 = ds_dva[pq][:, pq].imag
        j22 = ds_dvm[pq][:, pq].imag
        jac = vstack([hstack([j11, j12]), hstack([j21, j22])], format="csc")

        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                dx = spsolve(jac, -f)
            except MatrixRankWarning as e:
                raise SingularJacobianError(f"singular Jacobian at iteration {iterations}") from e
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError(f"singular Jacobian at iteration {iterations}")

        npq = len(pq)
        va[pq] += dx[:npq]
        vm[pq] += dx[npq:]
        voltage = vm * np.exp(1j * va)
        f = mismatch(voltage)
        residual = float(np.max(np.abs(f)))
        iterations += 1
        trace.append(residual)
        if not np.isfinite(residual):
            raise ConvergenceError(f"Newton power flow diverged at iteration {iterations}", trace=trace)
        logger.debug(f"Newton iteration {iterations}: mismatch {residual:.3e}")

    return PowerFlowResult(v=vm.copy(), theta=va.copy(), iterations=iterations, residual=residual, trace=trace)


def solve_power_flow(case: NetworkCase, injections: Optional[NodalInjections] = None,
                     tol: Optional[float] = None, max_iter: Optional[int] = None) -> PowerFlowResult:
    injections = injections or NodalInjections.from_case(case)
    slack = next(k for k, n in enumerate(case.ac_nodes) if n.id == case.slack_node.id)
    s_spec = injections.p + 1j * injections.q
    result = newton_raphson(build_ybus(case), s_spec, slack, injections.slack_voltage, tol, max_iter)
    logger.debug(f"Power flow converged in {result.iterations} iterations, mismatch {result.residual:.2e}")
    return result
