"""Independent reference computations for tests and acceptance checks.

Nothing here shares code with the main solver: the dense small-instance
transport oracle goes through a disciplined convex-programming backend
(cvxpy), the Grushin geodesics are closed-form with a damped-Newton shooting
step, and the translation baseline is analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .generator import RateSet
from .graph import TransportGraph
from .timegrid import TimeGrid


class OracleInfeasible(RuntimeError):
    """The reference convex program reports an infeasible instance."""


# -- Grushin geodesics -------------------------------------------------------

def _S(b: float) -> float:
    """sin(b)/b, series-stable near zero."""
    if abs(b) < 1e-4:
        b2 = b * b
        return 1.0 - b2 / 6.0 + b2 * b2 / 120.0
    return math.sin(b) / b


def _T(b: float) -> float:
    """(2b - sin 2b) / (4 b^2), series-stable near zero."""
    if abs(b) < 1e-3:
        b2 = b * b
        return b * (1.0 / 3.0 - b2 / 15.0 + 2.0 * b2 * b2 / 315.0)
    return (2.0 * b - math.sin(2.0 * b)) / (4.0 * b * b)


def _S_prime(b: float) -> float:
    if abs(b) < 1e-4:
        return -b / 3.0 + b ** 3 / 30.0
    return (b * math.cos(b) - math.sin(b)) / (b * b)


def _T_prime(b: float) -> float:
    if abs(b) < 1e-3:
        b2 = b * b
        return 1.0 / 3.0 - b2 / 5.0 + 2.0 * b2 * b2 / 63.0
    num = (2.0 - 2.0 * math.cos(2.0 * b)) * 4.0 * b * b \
        - (2.0 * b - math.sin(2.0 * b)) * 8.0 * b
    return num / (16.0 * b ** 4)


@dataclass(frozen=True)
class GrushinGeodesic:
    """Closed-form geodesic reaching (0, alpha) at t = 1.

    x1(t) = (a/b) sin(b(1-t)),
    x2(t) = (a^2/(4 b^2)) (2b(1-t) - sin(2b(1-t))) + alpha;
    the controls have constant magnitude |a|, so the energy is a^2.  The
    path is a global minimizer on the window b <= pi.
    """

    a: float
    b: float
    alpha: float

    def x1(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = 1.0 - t
        return self.a * s * np.vectorize(_S)(self.b * s)

    def x2(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        s = 1.0 - t
        return self.a ** 2 * s * s * np.vectorize(_T)(self.b * s) + self.alpha

    def point(self, t) -> np.ndarray:
        return np.stack([self.x1(t), self.x2(t)], axis=-1)

    def controls(self, t) -> np.ndarray:
        """(u1, u2) along the path: (-a cos(b(1-t)), -a sin(b(1-t)))."""
        t = np.asarray(t, dtype=float)
        s = self.b * (1.0 - t)
        return np.stack([-self.a * np.cos(s), -self.a * np.sin(s)], axis=-1)

    @property
    def cost(self) -> float:
        """Control energy of the path (squared length when minimizing)."""
        return self.a ** 2

    @property
    def globally_minimizing(self) -> bool:
        return abs(self.b) <= math.pi + 1e-12


def _shoot_residual(a: float, b: float, x1: float, dx2: float):
    f1 = a * _S(b) - x1
    f2 = a * a * _T(b) - dx2
    return f1, f2


def grushin_shoot(start_point, alpha: float = 0.0, tol: float = 1e-11,
                  max_iters: int = 80) -> GrushinGeodesic:
    """Invert the geodesic family at t = 0 for the parameters (a, b).

    Damped Newton on (x1(0), x2(0)) = start with multistart over the b range
    of globally minimizing paths; raises when no start converges (points on
    the degenerate set of the inversion).
    """
    x1, x2 = float(start_point[0]), float(start_point[1])
    dx2 = x2 - alpha
    if abs(x1) < 1e-300 and abs(dx2) < 1e-300:
        return GrushinGeodesic(0.0, 0.0, alpha)
    if abs(dx2) < 1e-15:
        # straight horizontal geodesic (b -> 0 limit)
        return GrushinGeodesic(x1, 0.0, alpha)

    scale = max(1.0, abs(x1), abs(dx2))
    b_starts = [s * math.pi for s in
                (0.05, 0.2, 0.4, 0.6, 0.8, 0.95, 0.999, 1.0)]
    if dx2 < 0:
        b_starts = [-b for b in b_starts]

    best = None
    for b0 in b_starts:
        tb = _T(b0)
        if tb * dx2 <= 0:
            continue
        a0 = math.copysign(math.sqrt(dx2 / tb), x1 if x1 != 0 else 1.0)
        a, b = a0, b0
        for _ in range(max_iters):
            f1, f2 = _shoot_residual(a, b, x1, dx2)
            res = math.hypot(f1, f2)
            if res < tol * scale:
                return GrushinGeodesic(a, b, alpha)
            j11, j12 = _S(b), a * _S_prime(b)
            j21, j22 = 2.0 * a * _T(b), a * a * _T_prime(b)
            det = j11 * j22 - j12 * j21
            if abs(det) < 1e-300:
                break
            da = (-f1 * j22 + f2 * j12) / det
            db = (-f2 * j11 + f1 * j21) / det
            step = 1.0
            for _ in range(40):
                g1, g2 = _shoot_residual(a + step * da, b + step * db, x1, dx2)
                if math.hypot(g1, g2) < res:
                    break
                step *= 0.5
            a += step * da
            b += step * db
            if best is None or math.hypot(*_shoot_residual(a, b, x1, dx2)) < best[0]:
                best = (math.hypot(*_shoot_residual(a, b, x1, dx2)), a, b)
    if best is not None and best[0] < tol * scale:
        return GrushinGeodesic(best[1], best[2], alpha)
    raise RuntimeError(
        f"geodesic shooting did not converge for start ({x1}, {x2}), "
        f"alpha={alpha}; best residual {best[0] if best else math.inf:.3e}")


def geodesic_energy_numeric(geo: GrushinGeodesic, n: int = 4001) -> float:
    """Recompute the control energy by differencing the closed-form path.

    u1 = dx1/dt and u2 = (dx2/dt)/x1 away from the singular line; composite
    trapezoid on a uniform fine grid.
    """
    t = np.linspace(0.0, 1.0, n)
    dt = t[1] - t[0]
    x1 = geo.x1(t)
    dx1 = np.gradient(geo.x1(t), dt, edge_order=2)
    dx2 = np.gradient(geo.x2(t), dt, edge_order=2)
    safe = np.abs(x1) > 1e-8
    u2sq = np.zeros_like(x1)
    u2sq[safe] = (dx2[safe] / x1[safe]) ** 2
    # near the singular line |u2| = |a sin(b(1-t))| stays bounded; fill the
    # few masked nodes by interpolation
    if not np.all(safe):
        u2sq[~safe] = np.interp(t[~safe], t[safe], u2sq[safe])
    energy = np.trapezoid(dx1 ** 2 + u2sq, t)
    return float(energy)


# -- dense small-instance transport oracle -----------------------------------

def dense_small_ot(graph: TransportGraph, rates: RateSet, mu0, mu1,
                   time_grid: TimeGrid, solver: str | None = None) -> float:
    """Reference optimal cost of a tiny instance via disciplined convex
    programming (kept deliberately independent of the main solver).

    Meant for m <= ~10 vertices and k <= ~10 steps; raises OracleInfeasible
    when the instance admits no transport.
    """
    import cvxpy as cp

    m, k, dt = graph.m, time_grid.k, time_grid.dt
    mu = cp.Variable((k + 1, m), nonneg=True)
    blocks = [cp.Variable((k, len(s)), nonneg=True) if len(s) else None
              for s in graph.subsets]

    cost_terms = []
    constraints = [mu[0] == np.asarray(mu0), mu[k] == np.asarray(mu1)]
    for j in range(k):
        drift_term = 0
        if rates.drift is not None:
            drift_term = rates.drift_matrix(j) @ mu[j]
        div = 0
        for s, J in zip(graph.subsets, blocks):
            if J is None:
                continue
            for q in range(len(s)):
                v, w = int(s.tails[q]), int(s.heads[q])
                flow = s.rates[q] * J[j, q]
                e = np.zeros(m)
                e[w] = 1.0
                e[v] = -1.0
                div = div + flow * e
                cost_terms.append(cp.quad_over_lin(J[j, q], mu[j, v]))
                cost_terms.append(cp.quad_over_lin(J[j, q], mu[j + 1, w]))
        constraints.append(mu[j + 1] - mu[j] == dt * (drift_term + div))
    objective = cp.Minimize(0.5 * dt * cp.sum(cost_terms))
    problem = cp.Problem(objective, constraints)

    solvers = [solver] if solver else ["CLARABEL", "SCS"]
    value, status = None, None
    for name in solvers:
        try:
            problem.solve(solver=name)
        except cp.error.SolverError:
            continue
        status = problem.status
        if status in ("optimal", "optimal_inaccurate"):
            value = problem.value
            break
        if status in ("infeasible", "infeasible_inaccurate"):
            raise OracleInfeasible(f"oracle instance infeasible ({status})")
    if value is None:
        raise RuntimeError(f"oracle solve failed with status {status!r}")
    return float(value)


# -- analytic baselines -------------------------------------------------------

def translation_wasserstein(block, displacement) -> float:
    """Squared 2-Wasserstein cost of rigidly translating a unit-mass block."""
    disp = np.asarray(displacement, dtype=float)
    return float(disp @ disp)
