"""Transport graph, signed edge subsets and connectivity checks.

The graph's vertices are the grid boxes; its directed edges come in both
orientations over every shared face.  Each control channel and sign keeps the
subset of edges with nonzero rate; feasibility of measure steering needs the
union of those subsets (the control graph) to be strongly connected and to
cover the whole graph, and any drift edges to lie inside it.  Those facts are
verified on the discrete objects rather than assumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .generator import RateSet
from .geometry import Grid


class HypothesisError(RuntimeError):
    """The assembled problem's feasibility hypotheses do not hold."""


@dataclass(frozen=True)
class EdgeSubset:
    """Edges with nonzero rate for one (channel, sign) pair."""

    channel: int          # 1-based channel index
    sign: str             # "+" or "-"
    edges: np.ndarray     # indices into the graph's edge list
    rates: np.ndarray     # rate value per subset edge
    tails: np.ndarray
    heads: np.ndarray

    def __len__(self) -> int:
        return int(self.edges.size)


@dataclass
class TransportGraph:
    """Vertices, directed edges and per-channel signed edge subsets."""

    m: int
    edge_tail: np.ndarray
    edge_head: np.ndarray
    edge_reverse: np.ndarray
    subsets: list[EdgeSubset]
    drift_edges: np.ndarray    # edge ids with nonzero drift rate at some t_j
    grid: Optional[Grid] = None

    @property
    def n_edges(self) -> int:
        return int(self.edge_tail.size)

    @property
    def control_edges(self) -> np.ndarray:
        """Sorted union of all signed subsets (the control graph's edges)."""
        if not self.subsets:
            return np.empty(0, dtype=np.int64)
        return np.unique(np.concatenate([s.edges for s in self.subsets]))

    def subset(self, channel: int, sign: str) -> EdgeSubset:
        for s in self.subsets:
            if s.channel == channel and s.sign == sign:
                return s
        raise KeyError(f"no subset for channel {channel} sign {sign}")

    def incidence(self, subset: EdgeSubset) -> sp.csr_matrix:
        """Flow operator D of one subset: row e computes mu(head) - mu(tail).

        Entries are exact integers; each column of D^T has one +1 (into the
        head) and one -1 (out of the tail), so divergence sums to zero.
        """
        ne = len(subset)
        rows = np.concatenate([np.arange(ne), np.arange(ne)])
        cols = np.concatenate([subset.heads, subset.tails])
        data = np.concatenate([np.ones(ne, dtype=np.int8),
                               -np.ones(ne, dtype=np.int8)])
        return sp.coo_matrix((data, (rows, cols)), shape=(ne, self.m)).tocsr()


def build_graph(grid: Grid, rates: RateSet) -> TransportGraph:
    """Assemble the graph and populate edge subsets from nonzero rates."""
    subsets = []
    for i in range(rates.n_channels):
        for sign, table in (("+", rates.control_plus), ("-", rates.control_minus)):
            ids = np.nonzero(table[i])[0].astype(np.int64)
            subsets.append(EdgeSubset(
                channel=i + 1, sign=sign, edges=ids, rates=table[i][ids],
                tails=grid.edge_tail[ids], heads=grid.edge_head[ids]))
    if rates.drift is None:
        drift_edges = np.empty(0, dtype=np.int64)
    else:
        drift_edges = np.nonzero(rates.drift.max(axis=0) > 0)[0].astype(np.int64)
    return TransportGraph(
        m=grid.size, edge_tail=grid.edge_tail.copy(),
        edge_head=grid.edge_head.copy(), edge_reverse=grid.edge_reverse.copy(),
        subsets=subsets, drift_edges=drift_edges, grid=grid)


@dataclass(frozen=True)
class ConnectivityResult:
    strongly_connected: bool
    component_count: int
    witness: Optional[tuple[int, int]] = None  # (u, v) with no path u -> v


def check_strong_connectivity(tails, heads, m: int) -> ConnectivityResult:
    """SCC decomposition of the directed graph on m vertices.

    When not strongly connected, ``witness`` is a vertex pair with no
    directed path between them.
    """
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    adj = sp.coo_matrix((np.ones(tails.size), (tails, heads)),
                        shape=(m, m)).tocsr()
    ncomp, labels = connected_components(adj, directed=True,
                                         connection="strong")
    if ncomp == 1:
        return ConnectivityResult(True, 1)
    u = int(np.nonzero(labels == labels[0])[0][0])
    v = int(np.nonzero(labels != labels[0])[0][0])
    reachable = breadth_first_order(adj, u, directed=True,
                                    return_predecessors=False)
    witness = (u, v) if v not in set(int(r) for r in reachable) else (v, u)
    return ConnectivityResult(False, int(ncomp), witness)


@dataclass
class HypothesesReport:
    """Computable feasibility facts for the assembled transport problem."""

    control_strongly_connected: bool
    component_count: int
    control_covers_graph: bool
    missing_edges: np.ndarray           # edges of G absent from G_c
    drift_within_control: bool
    stray_drift_edges: np.ndarray       # drift edges outside G_c
    witness: Optional[tuple[int, int]] = None
    boundary_measures: Optional[bool] = None  # mu0/mu1 touch the simplex boundary

    @property
    def passed(self) -> bool:
        return (self.control_strongly_connected and self.control_covers_graph
                and self.drift_within_control)

    def lines(self) -> list[str]:
        out = [
            f"control_strongly_connected: {self.control_strongly_connected}",
            f"component_count: {self.component_count}",
            f"control_covers_graph: {self.control_covers_graph}",
            f"missing_edge_count: {self.missing_edges.size}",
            f"drift_within_control: {self.drift_within_control}",
            f"stray_drift_edge_count: {self.stray_drift_edges.size}",
            f"passed: {self.passed}",
        ]
        if self.witness is not None:
            out.insert(2, f"witness_no_path: {self.witness[0]} -> {self.witness[1]}")
        if self.missing_edges.size:
            shown = ", ".join(str(int(e)) for e in self.missing_edges[:20])
            out.append(f"missing_edges (first 20): {shown}")
        if self.stray_drift_edges.size:
            shown = ", ".join(str(int(e)) for e in self.stray_drift_edges[:20])
            out.append(f"stray_drift_edges (first 20): {shown}")
        if self.boundary_measures is not None:
            out.append(f"boundary_measures: {self.boundary_measures}")
        return out


def validate_problem_hypotheses(graph: TransportGraph,
                                driftless: bool) -> HypothesesReport:
    """Check that the control graph is strongly connected, covers the full
    graph, and (with drift present) contains every drift edge."""
    ec = graph.control_edges
    conn = check_strong_connectivity(graph.edge_tail[ec], graph.edge_head[ec],
                                     graph.m)
    all_edges = np.arange(graph.n_edges)
    missing = np.setdiff1d(all_edges, ec, assume_unique=True)
    if driftless:
        drift_ok, stray = True, np.empty(0, dtype=np.int64)
    else:
        stray = np.setdiff1d(graph.drift_edges, ec, assume_unique=False)
        drift_ok = stray.size == 0
    return HypothesesReport(
        control_strongly_connected=conn.strongly_connected,
        component_count=conn.component_count,
        control_covers_graph=missing.size == 0,
        missing_edges=missing,
        drift_within_control=drift_ok,
        stray_drift_edges=stray,
        witness=conn.witness)
