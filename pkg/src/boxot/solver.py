"""First-order splitting solver for the staggered transport program.

Decision variables are the interior mass layers mu_j (j = 1..k-1; endpoint
layers are pinned constants) and the nonnegative fluxes J on every signed
control edge and time cell.  The objective couples each flux with the tail
mass at t_j and the head mass at t_{j+1}:

    cost = dt * sum over cells of J^2/2 * (1/mu_j(tail) + 1/mu_{j+1}(head))

subject to the explicit-in-drift continuity update

    mu_{j+1} - mu_j = dt * (A0(t_j) mu_j + sum_{i,s} (D_i^s)^T (A_i^s . J))

The solver is consensus ADMM: every cell gets private copies of its flux and
incident masses; the cost block applies the closed-form perspective prox to
each (flux, mass) copy pair, and the affine block projects onto continuity +
pinned endpoints + consensus through a normal-equation solve (symmetric
positive semidefinite, consistent) with Jacobi-preconditioned conjugate
gradient, warm-started across iterations.  Penalty rebalancing and
over-relaxation are standard.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .graph import TransportGraph
from .prox import perspective_prox

MASS_FLOOR = 1e-9  # inside 1/mu when evaluating costs and edge controls


@dataclass
class SolverOptions:
    tol: float = 1e-5
    max_iters: int = 50_000
    sigma0: Optional[float] = None   # consensus penalty; scale heuristic if None
    alpha: float = 1.7               # over-relaxation in (0, 2)
    check_every: int = 10
    adapt_every: int = 25
    adapt_factor: float = 2.0
    adapt_ratio: float = 10.0
    # inner projection: loose adaptive CG while iterating, one tight polish
    # solve at the end
    cg_loose_rtol_factor: float = 0.05
    cg_loose_max_iters: int = 30
    cg_polish_rtol: float = 1e-11
    cg_polish_max_iters: int = 2000
    preconditioner: str = "auto"     # "jacobi", "ilu" or "auto"
    verbose: bool = False


@dataclass
class Diagnostics:
    iterations: int = 0
    converged: bool = False
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    continuity_residual: float = np.inf
    max_negative_mass: float = 0.0
    sigma: float = 0.0
    cg_iterations_total: int = 0
    best_cost_history: list = field(default_factory=list)


@dataclass
class Solution:
    """Density path, fluxes, cost and solver diagnostics."""

    mu: np.ndarray                 # (k+1, m) masses, endpoints pinned
    flux: np.ndarray               # (k, nJe) cell fluxes, subset-blocked
    edge_controls: np.ndarray      # (k, nJe) U = J / max(mu_j(tail), floor)
    cost: float
    graph: TransportGraph
    subset_slices: list[slice]     # J columns per graph.subsets entry
    diagnostics: Diagnostics
    time_grid: object = None

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged

    def flux_for(self, channel: int, sign: str) -> np.ndarray:
        """(k, |subset|) flux block of one signed channel."""
        return self.flux[:, self._slice_of(channel, sign)]

    def controls_for(self, channel: int, sign: str) -> np.ndarray:
        return self.edge_controls[:, self._slice_of(channel, sign)]

    def _slice_of(self, channel: int, sign: str) -> slice:
        for s, sl in zip(self.graph.subsets, self.subset_slices):
            if s.channel == channel and s.sign == sign:
                return sl
        raise KeyError(f"no subset for channel {channel} sign {sign}")


class _Operators:
    """Constraint matrix, consensus index map and scratch data for one solve."""

    def __init__(self, graph: TransportGraph, rates, mu0, mu1, time_grid):
        self.graph = graph
        self.m = graph.m
        self.k = time_grid.k
        self.dt = time_grid.dt
        self.mu0 = mu0
        self.mu1 = mu1
        m, k, dt = self.m, self.k, self.dt

        # flux column layout: subsets concatenated, cells row-major in j
        self.sub_slices = []
        tails, heads, rvals = [], [], []
        start = 0
        for s in graph.subsets:
            self.sub_slices.append(slice(start, start + len(s)))
            tails.append(s.tails)
            heads.append(s.heads)
            rvals.append(s.rates)
            start += len(s)
        self.nJe = start
        self.sub_tail = np.concatenate(tails) if tails else np.empty(0, np.int64)
        self.sub_head = np.concatenate(heads) if heads else np.empty(0, np.int64)
        self.sub_rate = np.concatenate(rvals) if rvals else np.empty(0)

        self.n_mu = (k - 1) * m
        self.nJ = k * self.nJe
        self.nz = self.n_mu + self.nJ

        self._build_consensus()
        self._build_constraints(rates)

    # consensus map: extended vector zx = [mu_inner, J, mu0, mu1]
    def _build_consensus(self):
        m, k, nJe = self.m, self.k, self.nJe
        j = np.arange(k)[:, None]
        jglob = self.n_mu + j * nJe + np.arange(nJe)[None, :]
        a_idx = (j - 1) * m + self.sub_tail[None, :]
        a_idx[0] = self.nz + self.sub_tail            # mu0 constants
        b_idx = j * m + self.sub_head[None, :]
        b_idx[k - 1] = self.nz + m + self.sub_head    # mu1 constants

        blocks = [jglob.ravel(), a_idx.ravel(), jglob.ravel(), b_idx.ravel()]
        self.ncells = k * nJe
        counts = np.bincount(np.concatenate(blocks), minlength=self.nz + 2 * m)
        diag = counts[:self.nz].astype(float)
        # interior masses never touched by any cell keep an identity copy so
        # the consensus metric stays invertible
        orphan = np.nonzero(diag == 0)[0]
        if orphan.size:
            blocks.append(orphan)
            diag[orphan] = 1.0
        self.idx = np.concatenate(blocks)
        self.n_orphan = orphan.size
        self.D = diag
        self.ny = self.idx.size

    def extend(self, z: np.ndarray) -> np.ndarray:
        return np.concatenate([z, self.mu0, self.mu1])

    def gather(self, z: np.ndarray) -> np.ndarray:
        return self.extend(z)[self.idx]

    def scatter(self, y: np.ndarray) -> np.ndarray:
        return np.bincount(self.idx, weights=y,
                           minlength=self.nz + 2 * self.m)[:self.nz]

    def prox(self, arg: np.ndarray, gamma: float) -> np.ndarray:
        nc = self.ncells
        out = np.empty_like(arg)
        jt, rt = perspective_prox(arg[:nc], arg[nc:2 * nc], gamma)
        jh, rh = perspective_prox(arg[2 * nc:3 * nc], arg[3 * nc:4 * nc], gamma)
        out[:nc] = jt
        out[nc:2 * nc] = rt
        out[2 * nc:3 * nc] = jh
        out[3 * nc:4 * nc] = rh
        if self.n_orphan:
            out[4 * nc:] = arg[4 * nc:]
        return out

    # affine block: C z = rhs
    def _build_constraints(self, rates):
        m, k, dt, nJe = self.m, self.k, self.dt, self.nJe
        rows, cols, data = [], [], []

        # +1 on mu_{j+1} (interior layers only)
        if k >= 2:
            j = np.arange(k - 1)
            rc = (j[:, None] * m + np.arange(m)[None, :]).ravel()
            rows.append(rc)
            cols.append(rc)
            data.append(np.ones(rc.size))
            # -1 on mu_j for j = 1..k-1
            r2 = ((j[:, None] + 1) * m + np.arange(m)[None, :]).ravel()
            rows.append(r2)
            cols.append(rc)
            data.append(-np.ones(rc.size))

        # drift coupling -dt*A0(t_j) acting on interior mu_j (j = 1..k-1)
        drift = rates.drift
        if drift is not None:
            et, eh = self.graph.edge_tail, self.graph.edge_head
            for j in range(1, k):
                r = drift[j]
                nz = np.nonzero(r)[0]
                if nz.size == 0:
                    continue
                t_, h_, rv = et[nz], eh[nz], r[nz]
                col = (j - 1) * m + t_
                rows.append(j * m + h_)
                cols.append(col)
                data.append(-dt * rv)
                rows.append(j * m + t_)
                cols.append(col)
                data.append(dt * rv)

        # flux divergence -dt * (D^T (A . J)) per cell
        if self.nJe:
            j = np.arange(k)[:, None]
            colJ = (self.n_mu + j * nJe + np.arange(nJe)[None, :]).ravel()
            rh = (j * m + self.sub_head[None, :]).ravel()
            rt = (j * m + self.sub_tail[None, :]).ravel()
            rate_tiled = np.broadcast_to(self.sub_rate, (k, nJe)).ravel()
            rows.append(rh)
            cols.append(colJ)
            data.append(-dt * rate_tiled)
            rows.append(rt)
            cols.append(colJ)
            data.append(dt * rate_tiled)

        self.n_rows = k * m
        self.C = sp.coo_matrix(
            (np.concatenate(data),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_rows, self.nz)).tocsr()
        self.CT = self.C.T.tocsr()

        rhs = np.zeros(self.n_rows)
        a0mu0 = rates.drift_matrix(0) @ self.mu0 if drift is not None \
            else np.zeros(m)
        rhs[:m] += self.mu0 + dt * a0mu0
        rhs[(k - 1) * m:] -= self.mu1
        self.rhs = rhs

        dinv = 1.0 / self.D
        self.Dinv = dinv
        self.S_diag = np.asarray(
            self.C.multiply(self.C) @ dinv).ravel()
        self.S_diag[self.S_diag <= 0] = 1.0
        self._precond = None

    def S_matvec(self, x: np.ndarray) -> np.ndarray:
        return self.C @ (self.Dinv * (self.CT @ x))

    def build_preconditioner(self, kind: str) -> None:
        """Jacobi by default; incomplete LU of the (regularized) normal
        matrix for larger systems, falling back to Jacobi on failure."""
        if kind == "auto":
            kind = "ilu" if self.n_rows > 20_000 else "jacobi"
        if kind == "ilu":
            try:
                S = (self.C @ sp.diags(self.Dinv) @ self.CT).tocsc()
                S = S + sp.identity(self.n_rows, format="csc") \
                    * (1e-10 * self.S_diag.mean())
                ilu = sp.linalg.spilu(S, drop_tol=1e-5, fill_factor=12)
                self._precond = ilu.solve
                return
            except Exception:
                self._precond = None
        self._precond = None

    def apply_precond(self, r: np.ndarray) -> np.ndarray:
        if self._precond is not None:
            return self._precond(r)
        return r / self.S_diag

    def project(self, v: np.ndarray, lam: np.ndarray, rtol: float,
                max_iters: int):
        """Weighted affine projection: solve the consensus normal equation.

        Returns z minimizing ||E z - v|| subject to C z = rhs, together with
        the warm-startable multiplier and the CG iteration count.
        """
        rhs_z = self.scatter(v)
        r0 = self.rhs - self.C @ (self.Dinv * rhs_z)
        r0 -= r0.mean()   # stay in range(S); left null vector is all-ones
        lam, iters = _pcg(self.S_matvec, r0, lam, self.apply_precond,
                          rtol, max_iters)
        z = self.Dinv * (rhs_z + self.CT @ lam)
        return z, lam, iters

    def continuity_residual(self, z: np.ndarray) -> float:
        """Max-norm residual of the rate-form continuity equation."""
        return float(np.abs(self.C @ z - self.rhs).max(initial=0.0) / self.dt)

    def full_mu(self, z: np.ndarray) -> np.ndarray:
        mu = np.empty((self.k + 1, self.m))
        mu[0] = self.mu0
        mu[-1] = self.mu1
        if self.k >= 2:
            mu[1:-1] = z[:self.n_mu].reshape(self.k - 1, self.m)
        return mu

    def flux_of(self, z: np.ndarray) -> np.ndarray:
        return z[self.n_mu:].reshape(self.k, self.nJe)

    def evaluate_cost(self, z: np.ndarray) -> float:
        """Objective at the affine-feasible iterate (0^2/0 reads as 0)."""
        mu = np.maximum(self.full_mu(z), 0.0)
        J = np.maximum(self.flux_of(z), 0.0)
        a = mu[:-1][:, self.sub_tail] if self.nJe else np.empty((self.k, 0))
        b = mu[1:][:, self.sub_head] if self.nJe else np.empty((self.k, 0))
        terms = np.where(
            J > 0.0,
            0.5 * J * J * (1.0 / np.maximum(a, MASS_FLOOR)
                           + 1.0 / np.maximum(b, MASS_FLOOR)),
            0.0)
        return float(self.dt * terms.sum())

    def initial_z(self) -> np.ndarray:
        z = np.zeros(self.nz)
        if self.k >= 2:
            frac = (np.arange(1, self.k) / self.k)[:, None]
            z[:self.n_mu] = ((1.0 - frac) * self.mu0[None, :]
                             + frac * self.mu1[None, :]).ravel()
        return z


def _pcg(matvec, b, x0, precond, rtol, max_iters):
    """Preconditioned CG for a consistent SPSD system."""
    x = x0.copy()
    r = b - matvec(x)
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    it = 0
    while it < max_iters and np.linalg.norm(r) > rtol * bnorm:
        Ap = matvec(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        z = precond(r)
        rz_new = float(r @ z)
        if rz <= 0.0:
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, it


def default_sigma(ops: _Operators) -> float:
    """Penalty that puts the prox step near the working mass scale."""
    mass_scale = max(float(ops.mu0.max()), float(ops.mu1.max()), MASS_FLOOR)
    return ops.dt / mass_scale


def solve_admm(graph: TransportGraph, rates, mu0, mu1, time_grid,
               options: Optional[SolverOptions] = None) -> Solution:
    """Run the splitting solver; returns a Solution even when not converged
    (flagged in the diagnostics)."""
    opts = options or SolverOptions()
    ops = _Operators(graph, rates, mu0, mu1, time_grid)
    sigma = opts.sigma0 if opts.sigma0 is not None else default_sigma(ops)

    z = ops.initial_z()
    Ez = ops.gather(z)
    y = Ez.copy()
    w = np.zeros_like(y)
    lam = np.zeros(ops.n_rows)
    diag = Diagnostics(sigma=sigma)
    tiny = 1e-30
    best_cost = np.inf
    rp_rel = rd_rel = cont = np.inf

    for it in range(1, opts.max_iters + 1):
        z, lam, cg_iters = ops.project(y - w, lam, opts.cg_rtol,
                                       opts.cg_max_iters)
        diag.cg_iterations_total += cg_iters
        Ez = ops.gather(z)
        h = opts.alpha * Ez + (1.0 - opts.alpha) * y
        y_prev = y
        y = ops.prox(h + w, ops.dt / sigma)
        w = w + h - y

        if it % opts.check_every == 0 or it == opts.max_iters:
            rp = float(np.linalg.norm(Ez - y))
            rp_rel = rp / max(np.linalg.norm(Ez), np.linalg.norm(y), tiny)
            sd = sigma * ops.scatter(y - y_prev)
            dref = max(float(np.linalg.norm(sigma * ops.scatter(w))), tiny)
            rd_rel = float(np.linalg.norm(sd)) / dref
            cont = ops.continuity_residual(z)
            cost_now = ops.evaluate_cost(z)
            best_cost = min(best_cost, cost_now)
            diag.best_cost_history.append(best_cost)
            if opts.verbose and it % (opts.check_every * 20) == 0:
                print(f"  iter {it}: rp={rp_rel:.2e} rd={rd_rel:.2e} "
                      f"cont={cont:.2e} cost={cost_now:.6g} sigma={sigma:.2e}")
            if max(rp_rel, rd_rel, cont) < opts.tol:
                diag.converged = True
                diag.iterations = it
                break

        if it % opts.adapt_every == 0 and not diag.converged:
            if rp_rel > opts.adapt_ratio * rd_rel:
                sigma *= opts.adapt_factor
                w /= opts.adapt_factor
            elif rd_rel > opts.adapt_ratio * rp_rel:
                sigma /= opts.adapt_factor
                w *= opts.adapt_factor
    else:
        diag.iterations = opts.max_iters

    diag.primal_residual = rp_rel
    diag.dual_residual = rd_rel
    diag.continuity_residual = ops.continuity_residual(z)
    diag.sigma = sigma

    mu = ops.full_mu(z)
    diag.max_negative_mass = float(max(0.0, -mu.min()))
    mu = np.maximum(mu, 0.0)
    J = np.maximum(ops.flux_of(z), 0.0)
    tail_mass = mu[:-1][:, ops.sub_tail] if ops.nJe else np.empty((ops.k, 0))
    U = np.where(J > 0.0, J / np.maximum(tail_mass, MASS_FLOOR), 0.0)
    cost = ops.evaluate_cost(z)

    return Solution(mu=mu, flux=J, edge_controls=U, cost=cost, graph=graph,
                    subset_slices=ops.sub_slices, diagnostics=diag,
                    time_grid=time_grid)
