"""Finite-volume solver for mean exit (or occupation) times on a metric graph.

On every edge ``(1/(2l)) (l u')' + beta u' = -1_{source}``, written in
conservation form ``(p u')' = -2 p 1_{source}`` with ``p = l e^{2 beta x}``.
Vertices balance the fluxes ``p u'`` of all incident edges (continuity of
``u`` is built in by sharing one unknown), pocket tips have zero flux, the
left window end is held at 0 and the exit level ``a`` is absorbing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DivergenceError, PreconditionError, SingularSystemError
from .graph import GraphPoint, MetricGraph


@dataclass
class BvpSolution:
    """Grid solution per edge id: ``grids[k] = (x, u)``."""

    grids: dict
    beta: float
    a: float
    h: float
    n_unknowns: int

    def value_at(self, point: GraphPoint) -> float:
        k, x = point
        if k not in self.grids:
            raise PreconditionError(f"edge {k} lies beyond the exit level")
        xs, u = self.grids[k]
        return float(np.interp(x, xs, u))

    def rows(self):
        for k in sorted(self.grids):
            xs, u = self.grids[k]
            for xi, ui in zip(xs, u):
                yield {"edge": k, "x": float(xi), "u": float(ui)}


def solve_exit_bvp(graph: MetricGraph, beta: float, a: float, source_edges=None,
                   h: float = 1e-3, source_kinds=None) -> BvpSolution:
    """Expected time spent on ``source_edges`` (default: all) before the
    main-line coordinate reaches ``a``.  ``source_kinds`` (e.g. ``{"wing"}``)
    is an alternative way to pick the source set."""
    if not beta > 0:
        raise DivergenceError("beta must be positive")
    x_left = graph.x_range[0]
    if 2.0 * beta * x_left > math.log(1e-12):
        raise PreconditionError(f"left window end {x_left} too close: need "
                                f"exp(2 beta x_left) < 1e-12")
    if not (x_left < a <= graph.x_range[1]):
        raise PreconditionError("exit level a must lie inside the window")
    if source_edges is None:
        if source_kinds is None:
            source_edges = {e.id for e in graph.edges}
        else:
            source_edges = {e.id for e in graph.edges if e.kind in set(source_kinds)}
    source_edges = set(source_edges)

    # keep main edges left of a (clipped) and pockets attached strictly before a
    keep = []
    for e in graph.edges:
        if e.kind == "main":
            if e.A < a:
                keep.append((e, e.A, min(e.B, a)))
        else:
            if graph.spec.wings[e.wing].q < a:
                keep.append((e, e.A, e.B))

    # node numbering: vertices (shared), Dirichlet ends, edge interiors
    node_of_vertex = {}
    n = 0
    for e, lo, hi in keep:
        for vid in (e.va, e.vb):
            if vid is not None and vid not in node_of_vertex and graph.vertices[vid].x < a:
                node_of_vertex[vid] = n
                n += 1
    left_node = n
    exit_node = n + 1
    n += 2
    dirichlet = {left_node, exit_node}

    rows, cols, vals = [], [], []
    rhs_parts = []
    edge_nodes = {}
    for e, lo, hi in keep:
        m = max(4, int(math.ceil((hi - lo) / h)))
        xs = np.linspace(lo, hi, m + 1)
        ids = np.empty(m + 1, dtype=np.int64)
        ids[1:-1] = np.arange(n, n + m - 1)
        n += m - 1
        if lo == x_left and e.kind == "main":
            ids[0] = left_node
        else:
            ids[0] = node_of_vertex[e.va]
        if e.kind == "main" and hi == a:
            ids[-1] = exit_node
        else:
            ids[-1] = node_of_vertex[e.vb]
        edge_nodes[e.id] = (xs, ids)
        dx = np.diff(xs)
        mid = 0.5 * (xs[:-1] + xs[1:])
        lm = e.width(mid)
        xl, xr = xs[:-1], xs[1:]
        # conductances scaled by exp(-2 beta x_row) for the row they enter
        c_left_row = lm * np.exp(2 * beta * (mid - xl)) / dx
        c_right_row = lm * np.exp(2 * beta * (mid - xr)) / dx
        il, ir = ids[:-1], ids[1:]
        rows += [il, il, ir, ir]
        cols += [il, ir, ir, il]
        vals += [-c_left_row, c_left_row, -c_right_row, c_right_row]
        if e.id in source_edges:
            ql = xl + 0.25 * dx
            qr = xr - 0.25 * dx
            vol_l = 0.5 * dx * e.width(ql) * np.exp(2 * beta * (ql - xl))
            vol_r = 0.5 * dx * e.width(qr) * np.exp(2 * beta * (qr - xr))
            rhs_parts.append((il, -2.0 * vol_l))
            rhs_parts.append((ir, -2.0 * vol_r))

    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)
    # Dirichlet rows: identity
    mask = ~np.isin(r, list(dirichlet))
    r, c, v = r[mask], c[mask], v[mask]
    r = np.concatenate([r, list(dirichlet)])
    c = np.concatenate([c, list(dirichlet)])
    v = np.concatenate([v, [1.0, 1.0]])
    A = sp.csr_matrix((v, (r, c)), shape=(n, n))
    b = np.zeros(n)
    for idx, val in rhs_parts:
        np.add.at(b, idx, val)
    b[list(dirichlet)] = 0.0

    # every vertex node must touch at least one edge
    touched = np.zeros(n, bool)
    for xs, ids in edge_nodes.values():
        touched[ids] = True
    touched[list(dirichlet)] = True
    if not touched.all():
        orphan = [vid for vid, node in node_of_vertex.items() if not touched[node]]
        raise SingularSystemError(f"vertices {orphan} have no retained edges")
    try:
        u = spla.spsolve(A.tocsc(), b)
    except RuntimeError as exc:  # pragma: no cover - scipy signals singularity this way
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(u)):
        raise SingularSystemError("finite-volume system is singular (non-finite solution)")
    grids = {k: (xs, u[ids]) for k, (xs, ids) in edge_nodes.items()}
    return BvpSolution(grids, float(beta), float(a), float(h), n)
