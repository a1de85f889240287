"""The metric graph of cross-section components of a channel."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConstructionError, GeometryError
from .geometry import ChannelSpec, cross_section, validate_assumptions


class GraphPoint(NamedTuple):
    edge: int
    x: float


@dataclass(frozen=True, eq=False)
class Edge:
    """Edge ``id`` over ``[A, B]``.  Main edges carry the main-channel width,
    wing edges the pocket width.  ``va``/``vb`` are vertex ids at the ends
    (``None`` at the window boundary)."""

    id: int
    A: float
    B: float
    kind: str
    wing: int | None
    va: int | None
    vb: int | None
    spec: ChannelSpec

    @property
    def length(self) -> float:
        return self.B - self.A

    def contains(self, x) -> bool:
        return self.A <= x <= self.B

    def width(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "wing":
            return self.spec.wings[self.wing].width(x)
        l0 = self.spec.l0
        return np.where(x >= self.B, l0(x, "left"), l0(x, "right"))

    def width_derivative(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "wing":
            return self.spec.wings[self.wing].width_derivative(x)
        l0 = self.spec.l0
        return np.where(x >= self.B, l0.derivative(x, "left"), l0.derivative(x, "right"))

    def end_width(self, end: str) -> float:
        """One-sided width limit at end ``"A"`` or ``"B"``."""
        return float(self.width(self.A if end == "A" else self.B))


@dataclass(frozen=True)
class Vertex:
    """``kind`` is ``interior`` (pocket attachment, degree 3), ``jump`` (plain
    width jump, degree 2) or ``exterior`` (pocket tip, degree 1)."""

    id: int
    x: float
    kind: str
    ends: tuple  # ((edge id, "A" | "B"), ...)


@dataclass(frozen=True)
class GluingEntry:
    """Flux balance ``sum_k sign_k * alpha_k * f'_k = 0`` at a vertex; the sign
    is ``+1`` when the edge lies at ``x >= x_i``.  Exterior vertices carry the
    single reflecting condition ``l_k f'_k -> 0``."""

    vertex: int
    kind: str
    terms: tuple  # ((edge id, sign, alpha), ...)
    reflecting: bool

    def flux(self, slopes) -> float:
        """Signed weighted sum of one-sided slopes (a mapping edge id -> f')."""
        return float(sum(s * a * slopes[k] for k, s, a in self.terms))


@dataclass(frozen=True, eq=False)
class MetricGraph:
    spec: ChannelSpec
    edges: tuple
    vertices: tuple

    @property
    def x_range(self):
        return self.spec.x_range

    @property
    def main_edges(self):
        return [e for e in self.edges if e.kind == "main"]

    def main_edge_at(self, x: float, prefer: str = "right") -> Edge:
        mains = self.main_edges
        starts = np.array([e.A for e in mains])
        i = int(np.searchsorted(starts, x, side="right")) - 1
        i = min(max(i, 0), len(mains) - 1)
        if prefer == "left" and i > 0 and x == mains[i].A:
            i -= 1
        return mains[i]

    def incident(self, vid: int):
        return self.vertices[vid].ends

    def to_dict(self, samples_per_unit: int = 64):
        edges = []
        for e in self.edges:
            n = int(min(2001, max(2, math.ceil(e.length * samples_per_unit) + 1)))
            xs = np.linspace(e.A, e.B, n)
            edges.append({"id": e.id, "A": e.A, "B": e.B, "kind": e.kind, "wing": e.wing,
                          "va": e.va, "vb": e.vb,
                          "table": {"x": xs.tolist(), "l": e.width(xs).tolist()}})
        verts = []
        for v in self.vertices:
            g = gluing_weights(self, v.id)
            verts.append({"id": v.id, "x": v.x, "kind": v.kind,
                          "ends": [list(t) for t in v.ends],
                          "gluing": [{"edge": k, "sign": s, "weight": a} for k, s, a in g.terms],
                          "reflecting": g.reflecting})
        return {"format": "narrowchan.graph/1", "edges": edges, "vertices": verts}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def build_graph(spec: ChannelSpec, check: bool = True) -> MetricGraph:
    """Edges for every jump-free stretch of the main channel and every pocket;
    one vertex per jump (degree 3 where a pocket is attached) and per tip."""
    if check:
        report = validate_assumptions(spec)
        structural = [c for c in report.failures() if c.name != "width_bounds"]
        if structural:
            msg = "; ".join(f"{c.name}" + ("" if c.x is None else f" at x={c.x:.6g}")
                            for c in structural)
            raise ConstructionError(f"channel cannot be turned into a graph: {msg}")
    x0, x1 = spec.x_range
    wing_at_q = {w.q: j for j, w in enumerate(spec.wings)}
    splits = sorted({float(x) for x in spec.jumps if x0 < x < x1} | set(wing_at_q))
    edges, verts = [], []
    # main edge ids and vertex ids are assigned in x order, a pocket right
    # after the main edge that ends at its attachment
    cursor = x0
    prev_vertex = None
    pending = []  # (kind, payload) to instantiate once ids are known
    eid = 0
    vid = 0
    main_ids = []
    for p in splits + [x1]:
        main_ids.append(eid)
        pending.append(("main", (eid, cursor, p, prev_vertex)))
        eid += 1
        if p == x1:
            break
        this_v = vid
        vid += 1
        j = wing_at_q.get(p)
        if j is not None:
            w = spec.wings[j]
            tip_v = vid
            vid += 1
            pending.append(("wing", (eid, j, this_v, tip_v)))
            pending.append(("vertex", (this_v, p, "interior", j, eid)))
            pending.append(("tip", (tip_v, w.tip, eid, w.r > 0)))
            eid += 1
        else:
            pending.append(("vertex", (this_v, p, "jump", None, None)))
        prev_vertex = this_v
        cursor = p
    # second pass: fill edges and vertices
    edge_objs = {}
    vertex_at_x = {}
    for kind, data in pending:
        if kind == "vertex":
            vertex_at_x[data[1]] = data[0]
    for kind, data in pending:
        if kind == "main":
            k, a, b, va = data
            vb = vertex_at_x.get(b)
            edge_objs[k] = Edge(k, a, b, "main", None, va, vb, spec)
        elif kind == "wing":
            k, j, v_att, v_tip = data
            w = spec.wings[j]
            lo, hi = w.span
            va, vb = (v_att, v_tip) if w.r > 0 else (v_tip, v_att)
            edge_objs[k] = Edge(k, lo, hi, "wing", j, va, vb, spec)
    edges = tuple(edge_objs[k] for k in sorted(edge_objs))
    for kind, data in pending:
        if kind == "vertex":
            v, p, vkind, j, wing_eid = data
            ends = []
            for e in edges:
                if e.kind == "main" and e.B == p:
                    ends.append((e.id, "B"))
                elif e.kind == "main" and e.A == p:
                    ends.append((e.id, "A"))
            if wing_eid is not None:
                ends.append((wing_eid, "A" if spec.wings[j].r > 0 else "B"))
            verts.append(Vertex(v, p, vkind, tuple(sorted(ends))))
        elif kind == "tip":
            v, tip, k, positive = data
            verts.append(Vertex(v, tip, "exterior", ((k, "B" if positive else "A"),)))
    verts.sort(key=lambda v: v.id)
    return MetricGraph(spec, edges, tuple(verts))


def gluing_weights(graph: MetricGraph, vertex_id: int) -> GluingEntry:
    v = graph.vertices[vertex_id]
    terms = []
    for k, end in v.ends:
        e = graph.edges[k]
        sign = 1 if end == "A" else -1
        terms.append((k, sign, e.end_width(end)))
    return GluingEntry(v.id, v.kind, tuple(terms), v.kind == "exterior")


def locate(graph: MetricGraph, point) -> GraphPoint:
    """Edge whose cross-section component contains ``point``.

    Points on a vertex cross-section (the vertical segment at a jump) go to
    the main edge starting there.
    """
    x, z = map(float, point)
    spec = graph.spec
    spec.check_x(x)
    vx = {v.x: v for v in graph.vertices if v.kind != "exterior"}
    if x in vx:
        comps = cross_section(spec, x, "left") + cross_section(spec, x, "right")
        if any(lo <= z <= hi for lo, hi in comps):
            return GraphPoint(graph.main_edge_at(x).id, x)
        raise GeometryError(f"point ({x}, {z}) is outside the channel")
    comps = cross_section(spec, x)
    lo, hi = comps[0]
    if lo <= z <= hi:
        return GraphPoint(graph.main_edge_at(x).id, x)
    j = spec.wing_at(x)
    if j >= 0:
        wlo, whi = spec.wing_interval(j, x)
        if wlo <= z <= whi:
            for e in graph.edges:
                if e.kind == "wing" and e.wing == j:
                    return GraphPoint(e.id, x)
    raise GeometryError(f"point ({x}, {z}) is outside the channel")
