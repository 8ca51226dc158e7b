"""Uniform box partitions of rectangular domains.

A :class:`Grid` splits a d-dimensional axis-aligned box into equal sub-boxes
and enumerates the (d-1)-dimensional faces shared by neighboring boxes.  Axes
may be periodic, in which case the first and last slab along that axis share a
wraparound face.  Non-periodic domain boundaries carry no faces (zero-flux
boundaries).

Boxes are identified by a flat index in C order; faces carry a canonical
orientation (left box -> right box along +axis) and a tensor-product
Gauss-Legendre quadrature rule on the shared hyperplane.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] (cached; leggauss gives the [-1, 1] rule)."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


@dataclass(frozen=True)
class Face:
    """A shared box boundary with canonical orientation left -> right.

    ``normal`` points along +axis, out of ``left`` into ``right``; the face
    seen from the other side has the negated normal and identical quadrature.
    """

    left: int
    right: int
    axis: int
    normal: np.ndarray
    nodes: np.ndarray   # (q, d) points on the face hyperplane
    weights: np.ndarray  # (q,) positive, summing to the face measure

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def reversed(self) -> "Face":
        return Face(self.right, self.left, self.axis, -self.normal,
                    self.nodes, self.weights)


class Grid:
    """Uniform box partition of a rectangular domain.

    Parameters
    ----------
    dims : sequence of int
        Boxes per axis, all >= 1 with at least 2 boxes in total.
    bounds : sequence of (lo, hi)
        Domain interval per axis, lo < hi.
    periodic : sequence of bool, optional
        Per-axis wraparound flag; defaults to all False.
    quad_order : int
        Gauss-Legendre order per face axis (exact for per-axis polynomial
        degree <= 2*quad_order - 1).
    """

    def __init__(self, dims, bounds, periodic=None, quad_order: int = 3):
        dims = tuple(int(n) for n in dims)
        bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
        if periodic is None:
            periodic = (False,) * len(dims)
        periodic = tuple(bool(p) for p in periodic)
        if len(bounds) != len(dims) or len(periodic) != len(dims):
            raise ValueError("dims, bounds and periodic must have equal length")
        if any(n < 1 for n in dims):
            raise ValueError(f"box counts must be >= 1, got {dims}")
        for lo, hi in bounds:
            if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
                raise ValueError(f"degenerate bounds [{lo}, {hi}]")
        if int(np.prod(dims)) < 2:
            raise ValueError("need at least 2 boxes in total")
        if quad_order < 1:
            raise ValueError("quadrature order must be >= 1")

        self.dims = dims
        self.bounds = bounds
        self.periodic = periodic
        self.quad_order = int(quad_order)
        self.ndim = len(dims)
        self.size = int(np.prod(dims))
        self.spacing = tuple((hi - lo) / n for (lo, hi), n in zip(bounds, dims))
        self.box_volume = float(np.prod(self.spacing))
        self.lo = np.array([b[0] for b in bounds])
        self.hi = np.array([b[1] for b in bounds])
        self._h = np.array(self.spacing)

        self._build_faces()
        self._build_edges()

    # -- indexing ----------------------------------------------------------

    def index_of(self, multi) -> int:
        """Flat box index of a multi-index (C order)."""
        return int(np.ravel_multi_index(tuple(multi), self.dims))

    def multi_of(self, index: int) -> tuple[int, ...]:
        """Multi-index of a flat box index."""
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def centers(self) -> np.ndarray:
        """(m, d) array of box centers, ordered by flat index."""
        axes = [self.lo[a] + (np.arange(self.dims[a]) + 0.5) * self._h[a]
                for a in range(self.ndim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Wrap periodic coordinates into the domain; others untouched."""
        x = np.array(x, dtype=float, copy=True)
        for a in range(self.ndim):
            if self.periodic[a]:
                lo, hi = self.bounds[a]
                x[..., a] = lo + np.mod(x[..., a] - lo, hi - lo)
        return x

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Flat box index for each point (points assumed inside the domain).

        Periodic coordinates are wrapped first; coordinates exactly on the
        upper boundary fall into the last box.
        """
        x = self.wrap(np.atleast_2d(np.asarray(x, dtype=float)))
        idx = np.floor((x - self.lo) / self._h).astype(np.int64)
        idx = np.clip(idx, 0, np.array(self.dims) - 1)
        flat = np.ravel_multi_index(tuple(idx[..., a] for a in range(self.ndim)),
                                    self.dims)
        return flat

    # -- faces -------------------------------------------------------------

    def _build_faces(self):
        """Enumerate all shared faces, grouped by axis for vectorized use."""
        lefts, rights, axes = [], [], []
        # low-corner multi-index of the left box, per face
        corner_rows = []
        for a in range(self.ndim):
            n = self.dims[a]
            pair_lo = np.arange(n - 1)
            pair_hi = pair_lo + 1
            if self.periodic[a] and n >= 2:
                pair_lo = np.append(pair_lo, n - 1)
                pair_hi = np.append(pair_hi, 0)
            if pair_lo.size == 0:
                continue
            cross = [np.arange(self.dims[b]) for b in range(self.ndim)]
            cross[a] = pair_lo
            mesh = np.meshgrid(*cross, indexing="ij")
            left_multi = np.stack([m.ravel() for m in mesh], axis=-1)
            right_multi = left_multi.copy()
            if self.periodic[a]:
                right_multi[:, a] = np.where(left_multi[:, a] == n - 1, 0,
                                             left_multi[:, a] + 1)
            else:
                right_multi[:, a] = left_multi[:, a] + 1
            left_flat = np.ravel_multi_index(left_multi.T, self.dims)
            right_flat = np.ravel_multi_index(right_multi.T, self.dims)
            keep = left_flat != right_flat  # drop self-pairs (periodic n == 1)
            lefts.append(left_flat[keep])
            rights.append(right_flat[keep])
            axes.append(np.full(keep.sum(), a, dtype=np.int64))
            corner_rows.append(left_multi[keep])

        self.face_left = np.concatenate(lefts)
        self.face_right = np.concatenate(rights)
        self.face_axis = np.concatenate(axes)
        self._face_corner = np.concatenate(corner_rows, axis=0)
        self.n_faces = self.face_left.size

    def face_measure(self, axis: int) -> float:
        """(d-1)-measure of any face orthogonal to ``axis`` (1.0 when d=1)."""
        return float(np.prod([self.spacing[b] for b in range(self.ndim)
                              if b != axis])) if self.ndim > 1 else 1.0

    def face_quadrature(self, face_index: int, order: int | None = None):
        """Quadrature nodes/weights of one face; see :func:`face_quadrature`."""
        nodes, weights = self._axis_quadrature(
            int(self.face_axis[face_index]), order)
        sel = np.nonzero(self._axis_face_ids(int(self.face_axis[face_index]))
                         == face_index)[0][0]
        return nodes[sel], weights

    def _axis_face_ids(self, axis: int) -> np.ndarray:
        return np.nonzero(self.face_axis == axis)[0]

    def _axis_quadrature(self, axis: int, order: int | None = None):
        """Nodes (nfaces_axis, q, d) and shared weights (q,) for one axis.

        The face hyperplane sits at the upper boundary of the left box along
        ``axis``; cross-axis nodes tensor Gauss-Legendre points over the box
        cross-section.
        """
        if order is None:
            order = self.quad_order
        ids = self._axis_face_ids(axis)
        corners = self._face_corner[ids]
        plane = self.lo[axis] + (corners[:, axis] + 1) * self._h[axis]
        if self.periodic[axis]:
            # wrap faces sit on the domain's upper edge, identified with lo
            plane = np.where(corners[:, axis] == self.dims[axis] - 1,
                             self.hi[axis], plane)
        cross_axes = [b for b in range(self.ndim) if b != axis]
        x1, w1 = _gauss_legendre(order)
        if cross_axes:
            grids = np.meshgrid(*([x1] * len(cross_axes)), indexing="ij")
            wgrids = np.meshgrid(*([w1] * len(cross_axes)), indexing="ij")
            pts = np.stack([g.ravel() for g in grids], axis=-1)  # (q, d-1)
            wts = np.ones(pts.shape[0])
            for wg in wgrids:
                wts = wts * wg.ravel()
            q = pts.shape[0]
        else:
            pts = np.zeros((1, 0))
            wts = np.ones(1)
            q = 1
        nodes = np.empty((ids.size, q, self.ndim))
        nodes[:, :, axis] = plane[:, None]
        for col, b in enumerate(cross_axes):
            base = self.lo[b] + corners[:, b] * self._h[b]
            nodes[:, :, b] = base[:, None] + pts[None, :, col] * self._h[b]
        weights = wts * np.prod([self._h[b] for b in cross_axes]) \
            if cross_axes else wts
        return nodes, weights

    def face(self, face_index: int) -> Face:
        """Materialize one face with its quadrature rule."""
        a = int(self.face_axis[face_index])
        nodes, weights = self.face_quadrature(face_index)
        normal = np.zeros(self.ndim)
        normal[a] = 1.0
        return Face(int(self.face_left[face_index]),
                    int(self.face_right[face_index]), a, normal,
                    nodes, weights)

    # -- directed edges ----------------------------------------------------

    def _build_edges(self):
        """Directed edges over shared faces, canonically sorted.

        Both orientations of every face are present.  Parallel faces between
        the same ordered box pair (a 2-box periodic ring) collapse onto one
        edge; ``face_edge[f]`` maps face f to its (forward, backward) edge.
        """
        t = np.concatenate([self.face_left, self.face_right])
        h = np.concatenate([self.face_right, self.face_left])
        keys = t * self.size + h
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.edge_tail = (uniq // self.size).astype(np.int64)
        self.edge_head = (uniq % self.size).astype(np.int64)
        self.n_edges = uniq.size
        self.face_edge = np.stack(
            [inverse[:self.n_faces], inverse[self.n_faces:]], axis=1)
        rev_keys = self.edge_head * self.size + self.edge_tail
        self.edge_reverse = np.searchsorted(uniq, rev_keys)


def build_grid(dims, bounds, periodic=None, quad_order: int = 3) -> Grid:
    """Build a uniform box partition with enumerated faces."""
    return Grid(dims, bounds, periodic=periodic, quad_order=quad_order)


def face_quadrature(grid: Grid, face_index: int, order: int):
    """Tensor Gauss-Legendre rule (nodes, weights) on one face.

    Nodes lie exactly on the face hyperplane; weights are positive and sum to
    the face's (d-1)-measure (taken as 1 for the point faces of a 1-D grid).
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    return grid.face_quadrature(face_index, order=order)
