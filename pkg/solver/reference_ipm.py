"""
Dense reference barrier method for small LP/SOC programs

Log-barrier path following with equality-constrained Newton centering and a
phase-one search for a strictly feasible start. Slow and meant for programs
of at most a couple hundred variables, where it serves as an oracle for the
cvxpy binding. Programs without a strictly feasible point (beyond fixed
variables) are reported as a SolverError rather than guessed at.
"""
import warnings
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from loguru import logger
from scipy import linalg

from errors import SolverError
from solver.backends import ConicBackend
from solver.models import Solution, SolveStatus

MAX_VARIABLES = 200


@dataclass
class _Barrier:
    """Inequalities G x <= h and cones ||U x + u0|| <= t x + t0"""
    G: np.ndarray
    h: np.ndarray
    cones: List[Tuple[np.ndarray, float, np.ndarray, np.ndarray]]

    @property
    def degree(self) -> int:
        return len(self.h) + 2 * len(self.cones)

    def inside(self, x: np.ndarray) -> bool:
        if len(self.h) and np.any(self.h - self.G @ x <= 0):
            return False
        for t, t0, U, u0 in self.cones:
            tv = t @ x + t0
            u = U @ x + u0
            if tv <= 0 or tv * tv - u @ u <= 0:
                return False
        return True

    def value(self, x: np.ndarray) -> float:
        total = -float(np.sum(np.log(self.h - self.G @ x))) if len(self.h) else 0.0
        for t, t0, U, u0 in self.cones:
            tv = t @ x + t0
            u = U @ x + u0
            total -= np.log(tv * tv - u @ u)
        return total

    def derivatives(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n = len(x)
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        if len(self.h):
            r = self.h - self.G @ x
            grad += self.G.T @ (1.0 / r)
            hess += (self.G.T * (1.0 / r ** 2)) @ self.G
        for t, t0, U, u0 in self.cones:
            tv = t @ x + t0
            u = U @ x + u0
            psi = tv * tv - u @ u
            d_psi = 2.0 * tv * t - 2.0 * U.T @ u
            dd_psi = 2.0 * np.outer(t, t) - 2.0 * U.T @ U
            grad -= d_psi / psi
            hess += np.outer(d_psi, d_psi) / psi ** 2 - dd_psi / psi
        return grad, hess

    def multipliers(self, x: np.ndarray, scale: float) -> np.ndarray:
        if not len(self.h):
            return np.zeros(0)
        return 1.0 / (scale * (self.h - self.G @ x))


class ReferenceBackend(ConicBackend):
    name = "reference"

    def __init__(self, tol: float = 1e-8, mu: float = 10.0, max_newton: int = 200,
                 centering_tol: float = 1e-10):
        super().__init__()
        self.tol = tol
        self.mu = mu
        self.max_newton = max_newton
        self.centering_tol = centering_tol

    def _compile(self) -> None:
        if self.form.n > MAX_VARIABLES:
            logger.warning(f"Reference backend on {self.form.n} variables; expect slow solves")

    def _solve(self, lower: np.ndarray, upper: np.ndarray) -> Solution:
        form = self.form
        n = form.n
        b_eq, b_le = form.rhs(self.program)
        fixed = np.flatnonzero(lower == upper)

        A = form.A_eq.toarray()
        A = np.vstack([A, np.eye(n)[fixed]]) if len(fixed) else A
        b = np.concatenate([b_eq, lower[fixed]])

        rows, rhs = [form.A_le.toarray()], [b_le]
        free_lo = np.flatnonzero(np.isfinite(lower) & (lower != upper))
        free_up = np.flatnonzero(np.isfinite(upper) & (lower != upper))
        rows += [-np.eye(n)[free_lo], np.eye(n)[free_up]]
        rhs += [-lower[free_lo], upper[free_up]]
        G = np.vstack(rows).reshape(-1, n)
        h = np.concatenate(rhs)
        cones = [(c.t, c.t0, c.U, c.u0) for c in form.cones]

        x0, _, _, _ = linalg.lstsq(A, b) if A.shape[0] else (np.zeros(n), None, None, None)
        if A.shape[0] and np.linalg.norm(A @ x0 - b, np.inf) > 1e-8:
            return Solution(SolveStatus.INFEASIBLE, diagnostics={"reason": "inconsistent equalities"})

        barrier = _Barrier(G, h, cones)
        start = x0 if barrier.inside(x0) else self._phase_one(A, b, barrier, x0)
        if start is None:
            return Solution(SolveStatus.INFEASIBLE, diagnostics={"reason": "phase one found no interior point"})

        x, w, scale, unbounded = self._path(form.c, A, b, barrier, start)
        if unbounded:
            return Solution(SolveStatus.UNBOUNDED)
        le_mult = barrier.multipliers(x, scale)[:form.A_le.shape[0]]
        eq_sens = -w[:form.A_eq.shape[0]] / scale
        return Solution(
            SolveStatus.OPTIMAL,
            x=x,
            objective=float(form.c @ x + form.c0),
            duals=form.row_duals(self.program, eq_sens, le_mult),
            diagnostics={"barrier_gap": barrier.degree / scale},
        )

    def _phase_one(self, A: np.ndarray, b: np.ndarray, barrier: _Barrier,
                   x0: np.ndarray) -> Optional[np.ndarray]:
        """Minimize s over G x - h <= s, ||u|| <= t + s, s >= -1"""
        n = len(x0)
        s0 = 1.0
        if len(barrier.h):
            s0 = max(s0, float(np.max(barrier.G @ x0 - barrier.h)) + 1.0)
        for t, t0, U, u0 in barrier.cones:
            s0 = max(s0, float(np.linalg.norm(U @ x0 + u0) - (t @ x0 + t0)) + 1.0)

        G = np.hstack([barrier.G, -np.ones((len(barrier.h), 1))])
        G = np.vstack([G, np.append(np.zeros(n), -1.0)])
        h = np.append(barrier.h, 1.0)
        cones = [(np.append(t, 1.0), t0, np.hstack([U, np.zeros((U.shape[0], 1))]), u0)
                 for t, t0, U, u0 in barrier.cones]
        lifted = _Barrier(G, h, cones)
        A1 = np.hstack([A, np.zeros((A.shape[0], 1))])
        c1 = np.append(np.zeros(n), 1.0)
        z, _, _, _ = self._path(c1, A1, b, lifted, np.append(x0, s0), stop=lambda z: z[-1] < -1e-9)
        if z[-1] < -1e-9:
            return z[:-1]
        if z[-1] > 1e-7:
            return None
        raise SolverError("reference backend needs a strictly feasible program",
                          {"phase_one_value": float(z[-1])})

    def _path(self, c: np.ndarray, A: np.ndarray, b: np.ndarray, barrier: _Barrier, x: np.ndarray,
              stop=None) -> Tuple[np.ndarray, np.ndarray, float, bool]:
        """Follow the central path; returns the point, its equality multipliers and the final scale"""
        scale = 1.0
        while True:
            x, w, status = self._center(c, A, barrier, x, scale, stop)
            if status == "unbounded":
                return x, w, scale, True
            if status == "stopped" or (stop is not None and stop(x)):
                return x, w, scale, False
            if status == "stalled":
                raise SolverError("reference backend centering did not converge",
                                  {"scale": scale, "barrier_gap": barrier.degree / scale})
            if barrier.degree / scale < self.tol:
                return x, w, scale, False
            scale *= self.mu

    @staticmethod
    def _newton_step(c: np.ndarray, A: np.ndarray, barrier: _Barrier, x: np.ndarray,
                     scale: float) -> Tuple[np.ndarray, np.ndarray, float]:
        """Equality-constrained Newton step: H dx + A' w = -g, A dx = 0"""
        n = len(x)
        m = A.shape[0]
        grad, hess = barrier.derivatives(x)
        grad = grad + scale * c
        kkt = np.block([[hess, A.T], [A, np.zeros((m, m))]]) if m else hess
        rhs = np.concatenate([-grad, np.zeros(m)])
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", linalg.LinAlgWarning)
                sol = linalg.solve(kkt, rhs, assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            sol = linalg.lstsq(kkt, rhs)[0]
        if not np.all(np.isfinite(sol)):
            sol = linalg.lstsq(kkt, rhs)[0]
        step = sol[:n]
        return step, sol[n:], max(float(-grad @ step), 0.0)

    def _center(self, c: np.ndarray, A: np.ndarray, barrier: _Barrier, x: np.ndarray, scale: float,
                stop=None) -> Tuple[np.ndarray, np.ndarray, str]:
        """Damped Newton centering until the Newton decrement vanishes"""
        w = np.zeros(A.shape[0])
        for _ in range(self.max_newton):
            step, w, decrement = self._newton_step(c, A, barrier, x, scale)
            if decrement / 2 <= self.centering_tol:
                return x, w, "centered"
            lam = np.sqrt(decrement)
            size = 1.0 if lam < 0.25 else 1.0 / (1.0 + lam)
            while not barrier.inside(x + size * step):
                size *= 0.5
                if size < 1e-12:
                    return x, w, "stalled"
            x = x + size * step
            if c @ x < -1e12:
                return x, w, "unbounded"
            if stop is not None and stop(x):
                return x, w, "stopped"
        return x, w, "stalled"
