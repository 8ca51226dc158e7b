"""Discrete generators from face-flux quadrature.

For a vector field g and a face with unit normal n pointing from box v into
box w, the transition rate of the edge (v -> w) is

    (1 / box_volume) * integral over the face of max(g . n, 0)

evaluated with the grid's Gauss-Legendre rule.  Drift rates are sampled at
the left endpoint of each time interval and held constant across it; control
rates are split into the nonnegative forward/backward parts using +g and -g.

Rates are stored per directed edge, in mass convention: the vertex matrix
A0(t_j) acts on box-mass vectors and has zero column sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .fields import ControlAffineSystem
from .geometry import Grid
from .timegrid import TimeGrid

RATE_FLOOR = 1e-14  # below quadrature noise; truncated to keep sparsity


@dataclass
class RateSet:
    """Edge-based transition rates of the drift and control generators.

    ``control_plus[i]``/``control_minus[i]`` hold the forward/backward rates
    of channel i+1 on every directed edge; ``drift[j]`` holds the drift rates
    frozen on [t_j, t_{j+1}).  Edge indexing is the grid's canonical edge
    enumeration, shared with the transport graph.
    """

    grid: Grid
    control_plus: np.ndarray            # (n, n_edges)
    control_minus: np.ndarray           # (n, n_edges)
    drift: Optional[np.ndarray] = None  # (k, n_edges) or None when driftless
    time_grid: Optional[TimeGrid] = None

    @property
    def n_channels(self) -> int:
        return self.control_plus.shape[0]

    def drift_edge(self, j: int) -> np.ndarray:
        if self.drift is None:
            return np.zeros(self.grid.n_edges)
        return self.drift[j]

    def drift_matrix(self, j: int) -> sp.csr_matrix:
        """Vertex-based A0(t_j) in mass convention (zero column sums)."""
        g = self.grid
        rates = self.drift_edge(j)
        outflow = np.bincount(g.edge_tail, weights=rates, minlength=g.size)
        rows = np.concatenate([g.edge_head, np.arange(g.size)])
        cols = np.concatenate([g.edge_tail, np.arange(g.size)])
        data = np.concatenate([rates, -outflow])
        return sp.coo_matrix((data, (rows, cols)),
                             shape=(g.size, g.size)).tocsr()

    def control_matrix(self, i: int, sign: str) -> sp.csr_matrix:
        """Off-diagonal (head, tail) rate matrix of one signed channel."""
        g = self.grid
        rates = {"+": self.control_plus, "-": self.control_minus}[sign][i - 1]
        return sp.coo_matrix((rates, (g.edge_head, g.edge_tail)),
                             shape=(g.size, g.size)).tocsr()


def _edge_rates_from_field(grid: Grid, values_at, label: str):
    """Forward/backward edge rates of one field via per-axis quadrature.

    ``values_at`` maps an (N, d) array of points to (N, d) velocities.
    Returns two (n_edges,) arrays: rates of the face normal flux and of the
    reversed flux, accumulated onto the forward/backward edges of each face.
    """
    fwd = np.zeros(grid.n_edges)
    bwd = np.zeros(grid.n_edges)
    for axis in range(grid.ndim):
        ids = grid._axis_face_ids(axis)
        if ids.size == 0:
            continue
        nodes, weights = grid._axis_quadrature(axis)
        nf, q, d = nodes.shape
        vals = values_at(nodes.reshape(-1, d))
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"non-finite {label} value at a quadrature node")
        comp = vals.reshape(nf, q, d)[:, :, axis]
        fplus = np.maximum(comp, 0.0) @ weights / grid.box_volume
        fminus = np.maximum(-comp, 0.0) @ weights / grid.box_volume
        np.add.at(fwd, grid.face_edge[ids, 0], fplus)
        np.add.at(bwd, grid.face_edge[ids, 0], fminus)
        np.add.at(fwd, grid.face_edge[ids, 1], fminus)
        np.add.at(bwd, grid.face_edge[ids, 1], fplus)
    fwd[fwd < RATE_FLOOR] = 0.0
    bwd[bwd < RATE_FLOOR] = 0.0
    return fwd, bwd


def build_control_rates(system: ControlAffineSystem, grid: Grid):
    """Signed control rates; (n, n_edges) forward and backward arrays."""
    if system.dim != grid.ndim:
        raise ValueError("system dimension does not match grid")
    n = system.n_controls
    plus = np.zeros((n, grid.n_edges))
    minus = np.zeros((n, grid.n_edges))
    for i in range(n):
        plus[i], minus[i] = _edge_rates_from_field(
            grid, system.controls[i], f"control g{i + 1}")
    return plus, minus


def build_drift_rates(system: ControlAffineSystem, grid: Grid,
                      time_grid: TimeGrid) -> Optional[np.ndarray]:
    """Per-interval drift edge rates, sampled at the left endpoints t_j.

    Returns a (k, n_edges) array, or None for driftless systems.  For an
    autonomous drift the quadrature runs once and the row is repeated.
    """
    if system.dim != grid.ndim:
        raise ValueError("system dimension does not match grid")
    if system.drift is None:
        return None
    nodes = time_grid.nodes[:-1]
    if not system.time_varying:
        row, _ = _edge_rates_from_field(
            grid, lambda pts: system.drift(pts, float(nodes[0])), "drift")
        return np.tile(row, (time_grid.k, 1))
    drift = np.zeros((time_grid.k, grid.n_edges))
    for j, tj in enumerate(nodes):
        drift[j], _ = _edge_rates_from_field(
            grid, lambda pts: system.drift(pts, float(tj)), "drift")
    return drift


def build_rates(system: ControlAffineSystem, grid: Grid,
                time_grid: TimeGrid) -> RateSet:
    """Drift and control parts of the discrete generator in one call."""
    plus, minus = build_control_rates(system, grid)
    drift = build_drift_rates(system, grid, time_grid)
    return RateSet(grid=grid, control_plus=plus, control_minus=minus,
                   drift=drift, time_grid=time_grid)


def cfl_bound(rates: RateSet, dt: float) -> float:
    """Largest dt * (total drift outflow rate of a box) over all intervals.

    Values above 1 mean the explicit drift update can push a mass negative;
    callers should warn.
    """
    if rates.drift is None:
        return 0.0
    grid = rates.grid
    worst = 0.0
    for j in range(rates.drift.shape[0]):
        outflow = np.bincount(grid.edge_tail, weights=rates.drift[j],
                              minlength=grid.size)
        worst = max(worst, float(outflow.max(initial=0.0)))
    return dt * worst


def write_triplets(matrix: sp.spmatrix, path) -> None:
    """Dump a sparse matrix as text: header ``m nnz``, then one
    ``row col value`` line per stored entry, sorted by (row, col)."""
    coo = sp.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as f:
        f.write(f"{coo.shape[0]} {coo.nnz}\n")
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            f.write(f"{r} {c} {v!r}\n")


def read_triplets(path) -> sp.csr_matrix:
    """Inverse of :func:`write_triplets`."""
    with open(path) as f:
        m, nnz = (int(tok) for tok in f.readline().split())
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        data = np.empty(nnz)
        for idx in range(nnz):
            r, c, v = f.readline().split()
            rows[idx], cols[idx], data[idx] = int(r), int(c), float(v)
    return sp.coo_matrix((data, (rows, cols)), shape=(m, m)).tocsr()
