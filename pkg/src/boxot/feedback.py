"""Vertex-based feedback laws and controlled particle simulation.

The feedback value of channel i at box v on [t_j, t_{j+1}) averages the
optimal edge controls leaving v: mean of U_i^+ over the forward neighborhood
minus mean of U_i^- over the backward neighborhood (empty neighborhoods
contribute zero).  Particles then follow

    dx/dt = g0(x, t) + sum_i u_i(box(x), t_j) g_i(x)

with a classical 4th-order Runge-Kutta step on substeps of each interval;
the control is held constant per interval and per box.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fields import ControlAffineSystem
from .geometry import Grid
from .graph import TransportGraph
from .solver import Solution
from .timegrid import TimeGrid


@dataclass
class FeedbackField:
    """Per-channel, per-box, per-interval control values u_i(v, t_j)."""

    grid: Grid
    values: np.ndarray   # (n_channels, k, m)
    time_grid: TimeGrid

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def at(self, boxes: np.ndarray, j: int) -> np.ndarray:
        """(N, n_channels) control values for boxes at interval j."""
        return self.values[:, j, boxes].T


def extract_feedback(solution: Solution, graph: TransportGraph) -> FeedbackField:
    """Average optimal edge controls into box-wise feedback laws."""
    k = solution.flux.shape[0]
    m = graph.m
    n = max(s.channel for s in graph.subsets) if graph.subsets else 0
    values = np.zeros((n, k, m))
    for s, sl in zip(graph.subsets, graph_slices(solution, graph)):
        deg = np.bincount(s.tails, minlength=m).astype(float)
        nonzero = deg > 0
        U = solution.edge_controls[:, sl]        # (k, |subset|)
        for j in range(k):
            total = np.bincount(s.tails, weights=U[j], minlength=m)
            mean = np.zeros(m)
            mean[nonzero] = total[nonzero] / deg[nonzero]
            if s.sign == "+":
                values[s.channel - 1, j] += mean
            else:
                values[s.channel - 1, j] -= mean
    return FeedbackField(grid=graph.grid, values=values,
                         time_grid=solution.time_grid)


def graph_slices(solution: Solution, graph: TransportGraph) -> list[slice]:
    if graph is solution.graph:
        return solution.subset_slices
    if len(graph.subsets) != len(solution.subset_slices):
        raise ValueError("graph does not match the solution's flux layout")
    return solution.subset_slices


@dataclass
class ParticleEnsemble:
    """Weighted particles seeded inside the support of a measure."""

    positions: np.ndarray   # (P, d)
    weights: np.ndarray     # (P,) nonnegative, summing to the seeded mass
    home_boxes: np.ndarray  # (P,) box of each particle at seeding time

    @property
    def count(self) -> int:
        return self.positions.shape[0]


def seed_particles(grid: Grid, mu0: np.ndarray, per_box: int,
                   mode: str = "lattice",
                   seed: Optional[int] = None) -> ParticleEnsemble:
    """Seed ``per_box`` particles in every box carrying mass.

    ``lattice`` places a uniform r-per-axis lattice with r = per_box^(1/d)
    (falls back to seeded uniform sampling when per_box is not a d-th power);
    ``random`` always samples uniformly.  Each particle carries mass
    mu0(box) / per_box.
    """
    boxes = np.nonzero(mu0 > 0)[0]
    d = grid.ndim
    r = round(per_box ** (1.0 / d))
    use_lattice = mode == "lattice" and r ** d == per_box
    if mode not in ("lattice", "random"):
        raise ValueError(f"unknown seeding mode {mode!r}")
    rng = np.random.default_rng(seed)
    h = np.array(grid.spacing)
    positions, weights, homes = [], [], []
    if use_lattice:
        axes = [(np.arange(r) + 0.5) / r] * d
        mesh = np.meshgrid(*axes, indexing="ij")
        unit = np.stack([g.ravel() for g in mesh], axis=-1)  # (per_box, d)
    for v in boxes:
        corner = grid.lo + np.array(grid.multi_of(int(v))) * h
        local = unit if use_lattice else rng.random((per_box, d))
        positions.append(corner + local * h)
        weights.append(np.full(per_box, mu0[v] / per_box))
        homes.append(np.full(per_box, v, dtype=np.int64))
    return ParticleEnsemble(
        positions=np.concatenate(positions, axis=0),
        weights=np.concatenate(weights),
        home_boxes=np.concatenate(homes))


@dataclass
class SimulationResult:
    positions: np.ndarray          # (k+1, P, d) at the time nodes
    transported_fraction: float
    clamped_count: int
    weights: np.ndarray
    target_boxes: np.ndarray       # dilated target support used for the score


def _closed_loop_velocity(system: ControlAffineSystem, feedback: FeedbackField,
                          x: np.ndarray, t: float, j: int) -> np.ndarray:
    boxes = feedback.grid.locate(x)
    u = feedback.at(boxes, j)     # (P, n)
    vel = np.zeros_like(x)
    if system.drift is not None:
        vel += system.drift(x, t)
    for i in range(system.n_controls):
        vel += u[:, i:i + 1] * system.controls[i](x)
    return vel


def dilated_support(grid: Grid, mu: np.ndarray) -> np.ndarray:
    """Support boxes of mu plus a one-box halo (Chebyshev neighbors)."""
    core = np.nonzero(mu > 0)[0]
    ranges = [np.array([-1, 0, 1])] * grid.ndim
    mesh = np.meshgrid(*ranges, indexing="ij")
    offsets = np.stack([g.ravel() for g in mesh], axis=-1)
    dims = np.array(grid.dims)
    members = set()
    for v in core:
        base = np.array(grid.multi_of(int(v)))
        for off in offsets:
            nb = base + off
            ok = True
            for a in range(grid.ndim):
                if grid.periodic[a]:
                    nb[a] %= dims[a]
                elif not 0 <= nb[a] < dims[a]:
                    ok = False
                    break
            if ok:
                members.add(int(np.ravel_multi_index(tuple(nb), grid.dims)))
    return np.array(sorted(members), dtype=np.int64)


def simulate_particles(system: ControlAffineSystem, feedback: FeedbackField,
                       ensemble: ParticleEnsemble, time_grid: TimeGrid,
                       target: Optional[np.ndarray] = None,
                       substeps: int = 10) -> SimulationResult:
    """Integrate the closed loop and score arrival in the dilated target.

    ``target`` is the final mass vector whose support (plus one-box halo)
    defines "transported"; omit it to skip scoring.  Particles leaving the
    domain through a non-periodic boundary are clamped to it and counted.
    """
    grid = feedback.grid
    k, dt = time_grid.k, time_grid.dt
    h_ode = dt / substeps
    x = ensemble.positions.copy()
    log = np.empty((k + 1, ensemble.count, grid.ndim))
    log[0] = x
    clamped = np.zeros(ensemble.count, dtype=bool)
    lo, hi = grid.lo, grid.hi
    open_axes = [a for a in range(grid.ndim) if not grid.periodic[a]]

    for j in range(k):
        t = time_grid.nodes[j]
        for _ in range(substeps):
            k1 = _closed_loop_velocity(system, feedback, x, t, j)
            k2 = _closed_loop_velocity(system, feedback,
                                       x + 0.5 * h_ode * k1, t + 0.5 * h_ode, j)
            k3 = _closed_loop_velocity(system, feedback,
                                       x + 0.5 * h_ode * k2, t + 0.5 * h_ode, j)
            k4 = _closed_loop_velocity(system, feedback,
                                       x + h_ode * k3, t + h_ode, j)
            x = x + (h_ode / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            x = grid.wrap(x)
            for a in open_axes:
                out = (x[:, a] < lo[a]) | (x[:, a] > hi[a])
                clamped |= out
                x[:, a] = np.clip(x[:, a], lo[a], hi[a])
            t += h_ode
        log[j + 1] = x

    if target is not None:
        halo = dilated_support(grid, target)
        final_boxes = grid.locate(x)
        inside = np.isin(final_boxes, halo)
        fraction = float(ensemble.weights[inside].sum()
                         / ensemble.weights.sum())
    else:
        halo = np.empty(0, dtype=np.int64)
        fraction = float("nan")
    return SimulationResult(positions=log, transported_fraction=fraction,
                            clamped_count=int(clamped.sum()),
                            weights=ensemble.weights, target_boxes=halo)


def write_trajectories(path, result: SimulationResult,
                       time_grid: TimeGrid) -> None:
    """CSV of (particle, t, x_1..x_d) rows for every time node."""
    knodes = time_grid.nodes
    nsteps, count, d = result.positions.shape
    with open(path, "w") as f:
        f.write("particle,t," + ",".join(f"x{a + 1}" for a in range(d)) + "\n")
        for p in range(count):
            for j in range(nsteps):
                coords = ",".join(repr(float(c))
                                  for c in result.positions[j, p])
                f.write(f"{p},{knodes[j]!r},{coords}\n")
