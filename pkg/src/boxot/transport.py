"""Assembly and solution of the staggered convex transport program.

`assemble` validates measures and feasibility hypotheses and freezes the
problem; `solve` runs the splitting solver; `cost_sweep` solves a family of
horizons at fixed time step.  Density paths, fluxes and cost tables have a
documented text and binary serialization (see README).
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .fields import ControlAffineSystem
from .generator import RateSet, build_rates, cfl_bound
from .geometry import Grid
from .graph import (HypothesisError, TransportGraph, build_graph,
                    validate_problem_hypotheses)
from .solver import Solution, SolverOptions, solve_admm
from .timegrid import TimeGrid

__all__ = [
    "TimeGrid", "TransportProblem", "Solution", "SolverOptions",
    "assemble", "solve", "cost_sweep", "normalize_measure",
    "write_density_path", "read_density_path", "write_fluxes",
    "write_cost_table",
]


def normalize_measure(mu, m: int, warn_threshold: float = 1e-6) -> np.ndarray:
    """Validate and scale a nonnegative mass vector to total mass one."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (m,):
        raise ValueError(f"measure must have {m} entries, got shape {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("measure has non-finite entries")
    if np.any(mu < 0):
        raise ValueError("measure has negative entries")
    total = mu.sum()
    if total <= 0:
        raise ValueError("measure has zero total mass")
    if abs(total - 1.0) > warn_threshold:
        warnings.warn(f"measure mass {total:.6g} != 1; normalizing",
                      stacklevel=2)
    return mu / total


@dataclass
class TransportProblem:
    """A validated, solver-ready transport instance."""

    graph: TransportGraph
    rates: RateSet
    mu0: np.ndarray
    mu1: np.ndarray
    time_grid: TimeGrid
    options: SolverOptions = field(default_factory=SolverOptions)
    hypotheses: Optional[object] = None
    cfl: float = 0.0

    @property
    def variable_count(self) -> int:
        nJe = sum(len(s) for s in self.graph.subsets)
        return (self.time_grid.k - 1) * self.graph.m + self.time_grid.k * nJe

    @property
    def boundary_measures(self) -> bool:
        """True when either endpoint lies on the simplex boundary."""
        return bool(np.any(self.mu0 == 0.0) or np.any(self.mu1 == 0.0))


def assemble(graph: TransportGraph, rates: RateSet, mu0, mu1,
             time_grid: TimeGrid, options: Optional[SolverOptions] = None,
             override_hypotheses: bool = False) -> TransportProblem:
    """Normalize measures, verify feasibility hypotheses, freeze the problem.

    Raises HypothesisError when the control graph is not strongly connected /
    does not cover the graph / misses drift edges, unless overridden (the
    solve may then diverge on disconnected support).
    """
    m = graph.m
    mu0 = normalize_measure(mu0, m)
    mu1 = normalize_measure(mu1, m)
    report = validate_problem_hypotheses(graph, driftless=rates.drift is None)
    problem = TransportProblem(graph=graph, rates=rates, mu0=mu0, mu1=mu1,
                               time_grid=time_grid,
                               options=options or SolverOptions())
    report.boundary_measures = problem.boundary_measures
    problem.hypotheses = report
    if not report.passed and not override_hypotheses:
        raise HypothesisError(
            "feasibility hypotheses failed:\n" + "\n".join(report.lines()))
    problem.cfl = cfl_bound(rates, time_grid.dt)
    if problem.cfl > 1.0:
        warnings.warn(
            f"drift CFL ratio {problem.cfl:.3g} > 1: the explicit drift "
            "update can push masses negative; consider a smaller time step",
            stacklevel=2)
    return problem


def solve(problem: TransportProblem) -> Solution:
    """Solve the assembled program by proximal splitting."""
    sol = solve_admm(problem.graph, problem.rates, problem.mu0, problem.mu1,
                     problem.time_grid, problem.options)
    if not sol.converged:
        warnings.warn(
            f"solver stopped after {sol.diagnostics.iterations} iterations "
            f"with residuals p={sol.diagnostics.primal_residual:.2e} "
            f"d={sol.diagnostics.dual_residual:.2e}", stacklevel=2)
    return sol


@dataclass(frozen=True)
class SweepRecord:
    t_f: float
    k: int
    cost: float
    iterations: int
    residual: float
    converged: bool


def cost_sweep(system: ControlAffineSystem, grid: Grid, mu0, mu1,
               horizons: Sequence[float], dt: float,
               options: Optional[SolverOptions] = None,
               override_hypotheses: bool = False) -> list[SweepRecord]:
    """Independent solves over a list of horizons at fixed time step."""
    records = []
    for t_f in horizons:
        k = int(round(t_f / dt))
        if abs(k * dt - t_f) > 1e-9 * max(1.0, t_f) or k < 1:
            raise ValueError(f"horizon {t_f} is not a multiple of dt={dt}")
        tg = TimeGrid(t_f=float(t_f), k=k)
        rates = build_rates(system, grid, tg)
        graph = build_graph(grid, rates)
        problem = assemble(graph, rates, mu0, mu1, tg, options=options,
                           override_hypotheses=override_hypotheses)
        sol = solve(problem)
        records.append(SweepRecord(
            t_f=float(t_f), k=k, cost=sol.cost,
            iterations=sol.diagnostics.iterations,
            residual=max(sol.diagnostics.primal_residual,
                         sol.diagnostics.dual_residual,
                         sol.diagnostics.continuity_residual),
            converged=sol.converged))
    return records


# -- serialization ----------------------------------------------------------

_DENSITY_MAGIC = b"BOXOTDP1"


def _grid_header_lines(grid: Grid, k: int, n_edges: int) -> list[str]:
    return [
        f"# m={grid.size} k={k} edges={n_edges}",
        f"# dims={','.join(str(n) for n in grid.dims)}",
        "# bounds=" + ";".join(f"{lo!r},{hi!r}" for lo, hi in grid.bounds),
        f"# periodic={','.join(str(int(p)) for p in grid.periodic)}",
    ]


def write_density_path(path, grid: Grid, time_grid: TimeGrid,
                       mu: np.ndarray, binary: bool = False,
                       density: bool = False) -> None:
    """Write the mass path: header plus one record per time node.

    Text form: '#'-prefixed header lines, then rows ``t,mass_0,...,mass_{m-1}``.
    Binary form: magic ``BOXOTDP1``, little-endian int64 (m, k, ndim), int64
    dims, float64 bounds lo/hi pairs, int64 periodic flags, then k+1 records
    of float64 (t_j, m masses).  ``density`` divides masses by box volume.
    """
    values = mu / grid.box_volume if density else mu
    nodes = time_grid.nodes
    if binary:
        with open(path, "wb") as f:
            f.write(_DENSITY_MAGIC)
            f.write(struct.pack("<3q", grid.size, time_grid.k, grid.ndim))
            f.write(np.asarray(grid.dims, dtype="<i8").tobytes())
            f.write(np.asarray(grid.bounds, dtype="<f8").tobytes())
            f.write(np.asarray(grid.periodic, dtype="<i8").tobytes())
            for j in range(time_grid.k + 1):
                f.write(np.asarray([nodes[j]], dtype="<f8").tobytes())
                f.write(np.asarray(values[j], dtype="<f8").tobytes())
        return
    with open(path, "w") as f:
        for line in _grid_header_lines(grid, time_grid.k, grid.n_edges):
            f.write(line + "\n")
        for j in range(time_grid.k + 1):
            row = ",".join(repr(float(v)) for v in values[j])
            f.write(f"{nodes[j]!r},{row}\n")


def read_density_path(path, binary: bool = False):
    """Read a density-path file; returns (times, values) arrays."""
    if binary:
        with open(path, "rb") as f:
            if f.read(8) != _DENSITY_MAGIC:
                raise ValueError("not a density-path binary file")
            m, k, ndim = struct.unpack("<3q", f.read(24))
            f.read(8 * ndim)            # dims
            f.read(16 * ndim)           # bounds
            f.read(8 * ndim)            # periodic
            raw = np.frombuffer(f.read(), dtype="<f8")
        rec = raw.reshape(k + 1, m + 1)
        return rec[:, 0].copy(), rec[:, 1:].copy()
    times, rows = [], []
    with open(path) as f:
        for line in f:
            if line.startswith("#") or not line.strip():
                continue
            parts = line.strip().split(",")
            times.append(float(parts[0]))
            rows.append([float(p) for p in parts[1:]])
    return np.array(times), np.array(rows)


def write_fluxes(path, solution: Solution, time_grid: TimeGrid,
                 binary: bool = False) -> None:
    """Write cell fluxes.

    Text: header, then rows ``j,t_j,channel,sign,tail,head,flux`` for every
    nonzero flux.  Binary: magic ``BOXOTFX1``, int64 (k, n_subset_edges,
    n_subsets), per subset int64 (channel, sign(+1/-1), count), int64 tails,
    heads, then k records of n_subset_edges float64.
    """
    g = solution.graph
    nodes = time_grid.nodes
    if binary:
        with open(path, "wb") as f:
            f.write(b"BOXOTFX1")
            f.write(struct.pack("<3q", time_grid.k,
                                solution.flux.shape[1], len(g.subsets)))
            for s in g.subsets:
                f.write(struct.pack("<3q", s.channel,
                                    1 if s.sign == "+" else -1, len(s)))
            for s in g.subsets:
                f.write(np.asarray(s.tails, dtype="<i8").tobytes())
                f.write(np.asarray(s.heads, dtype="<i8").tobytes())
            f.write(np.asarray(solution.flux, dtype="<f8").tobytes())
        return
    with open(path, "w") as f:
        f.write("# j,t,channel,sign,tail,head,flux\n")
        for j in range(time_grid.k):
            for s, sl in zip(g.subsets, solution.subset_slices):
                block = solution.flux[j, sl]
                nz = np.nonzero(block)[0]
                for q in nz:
                    f.write(f"{j},{nodes[j]!r},{s.channel},{s.sign},"
                            f"{s.tails[q]},{s.heads[q]},{block[q]!r}\n")


def write_cost_table(path, records: Sequence[SweepRecord]) -> None:
    """CSV of (t_f, cost, iterations, residual) rows."""
    with open(path, "w") as f:
        f.write("t_f,cost,iterations,residual\n")
        for r in records:
            f.write(f"{r.t_f!r},{r.cost!r},{r.iterations},{r.residual!r}\n")
