"""Monte Carlo for the limiting diffusion on the metric graph.

Inside an edge the x-coordinate follows Euler-Maruyama for
``dx = (beta + l'/(2l)) dt + dW``.  Near an attachment or jump vertex (inside
a ball of radius ``h_vertex``) the walker is resolved by the exact exit law
of a skew drifted Brownian motion from that ball: from distance ``d`` on the
entry edge it either leaves at distance ``h`` on the same edge or reaches the
vertex, from where it leaves on edge ``j`` with probability proportional to
``alpha_j / S_j(h)``, ``S_j`` being the scale function of the radial drift on
that edge.  Expected times are charged to the edge kinds.  Pocket tips reflect
(Skorokhod reflection using the Brownian-bridge maximum), and the exit level
is monitored with the bridge crossing probability between steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import stats

from .errors import ParameterError, PreconditionError, SimulationFault
from .graph import GraphPoint, MetricGraph

VERTEX_LAWS = ("exact", "simple")


@dataclass(frozen=True)
class SimParams:
    dt: float = 1e-4
    beta: float = 1.0
    h_vertex: float | None = None
    drift_clamp: float | None = None
    seed: int = 0
    n_paths: int = 1000
    vertex_law: str = "exact"
    bridge_exit: bool = True
    max_time: float = 1e6

    def __post_init__(self):
        if not self.dt > 0:
            raise ParameterError("dt must be positive")
        if self.h_vertex is None:
            object.__setattr__(self, "h_vertex", 3.0 * math.sqrt(self.dt))
        if self.drift_clamp is None:
            object.__setattr__(self, "drift_clamp", 10.0 / math.sqrt(self.dt))
        if self.h_vertex < 3.0 * math.sqrt(self.dt) * (1 - 1e-12):
            raise ParameterError("h_vertex must be at least 3*sqrt(dt)")
        if not self.drift_clamp > 0:
            raise ParameterError("drift_clamp must be positive")
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.vertex_law not in VERTEX_LAWS:
            raise ParameterError(f"vertex_law must be one of {VERTEX_LAWS}")


@dataclass
class ExitSample:
    tau: float
    occupation: dict
    path: np.ndarray | None = None


@dataclass
class ExitBatch:
    """Per-path exit times and occupation times by edge kind."""

    tau: np.ndarray
    occ_main: np.ndarray
    occ_wing: np.ndarray
    paths: list = field(default_factory=list)

    def __len__(self):
        return self.tau.size

    def __getitem__(self, i) -> ExitSample:
        p = self.paths[i] if i < len(self.paths) else None
        return ExitSample(float(self.tau[i]), {"main": float(self.occ_main[i]),
                                               "wing": float(self.occ_wing[i])}, p)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def rows(self):
        for i in range(len(self)):
            yield {"path": i, "tau": float(self.tau[i]), "occ_main": float(self.occ_main[i]),
                   "occ_wing": float(self.occ_wing[i])}


@dataclass(frozen=True)
class MeanEstimate:
    mean: float
    stderr: float
    ci_low: float
    ci_high: float
    n: int

    @classmethod
    def from_samples(cls, x, level=0.95):
        x = np.asarray(x, dtype=float)
        if x.size < 2:
            raise PreconditionError("need at least two samples")
        m = float(x.mean())
        se = float(x.std(ddof=1) / math.sqrt(x.size))
        z = float(stats.norm.ppf(0.5 + level / 2))
        return cls(m, se, m - z * se, m + z * se, int(x.size))


# --------------------------------------------------------------------- packing
@dataclass
class PackedGraph:
    e_a: np.ndarray
    e_b: np.ndarray
    e_kind: np.ndarray
    e_va: np.ndarray
    e_vb: np.ndarray
    e_lo: np.ndarray
    e_hi: np.ndarray
    w_q: np.ndarray
    w_r: np.ndarray
    w_level: np.ndarray
    w_rho: np.ndarray
    tx: np.ndarray
    ty: np.ndarray
    td: np.ndarray
    v_x: np.ndarray
    v_kind: np.ndarray
    v_deg: np.ndarray
    v_edge: np.ndarray
    v_sign: np.ndarray
    v_alpha: np.ndarray
    x_left: float


def pack_graph(graph: MetricGraph) -> PackedGraph:
    spec = graph.spec
    l0 = spec.l0
    tx = l0.x
    E = len(graph.edges)
    e_a = np.array([e.A for e in graph.edges])
    e_b = np.array([e.B for e in graph.edges])
    e_kind = np.array([0 if e.kind == "main" else 1 for e in graph.edges], dtype=np.int64)
    e_va = np.array([-1 if e.va is None else e.va for e in graph.edges], dtype=np.int64)
    e_vb = np.array([-1 if e.vb is None else e.vb for e in graph.edges], dtype=np.int64)
    e_lo = np.zeros(E, dtype=np.int64)
    e_hi = np.zeros(E, dtype=np.int64)
    w_q = np.zeros(E)
    w_r = np.zeros(E)
    w_level = np.zeros(E)
    w_rho = np.zeros(E)
    for i, e in enumerate(graph.edges):
        if e.kind == "main":
            # right-limit copy at A, left-limit copy at B
            e_lo[i] = np.searchsorted(tx, e.A, side="right") - 1
            e_hi[i] = np.searchsorted(tx, e.B, side="left")
        else:
            w = spec.wings[e.wing]
            w_q[i], w_r[i], w_level[i], w_rho[i] = w.q, w.r, w.level, w.tip_radius
    V = len(graph.vertices)
    v_x = np.array([v.x for v in graph.vertices]) if V else np.zeros(0)
    v_kind = np.array([1 if v.kind == "exterior" else 0 for v in graph.vertices], dtype=np.int64)
    v_deg = np.array([len(v.ends) for v in graph.vertices], dtype=np.int64)
    v_edge = -np.ones((max(V, 1), 3), dtype=np.int64)
    v_sign = np.zeros((max(V, 1), 3))
    v_alpha = np.zeros((max(V, 1), 3))
    for v in graph.vertices:
        for j, (k, end) in enumerate(v.ends):
            v_edge[v.id, j] = k
            v_sign[v.id, j] = 1.0 if end == "A" else -1.0
            v_alpha[v.id, j] = graph.edges[k].end_width(end)
    return PackedGraph(e_a, e_b, e_kind, e_va, e_vb, e_lo, e_hi, w_q, w_r, w_level, w_rho,
                       np.ascontiguousarray(tx), np.ascontiguousarray(l0.y),
                       np.ascontiguousarray(l0.d), v_x, v_kind, v_deg, v_edge, v_sign, v_alpha,
                       float(graph.x_range[0]))


# --------------------------------------------------------------------- kernels
@nb.njit(cache=True)
def _main_width(tx, ty, td, lo, hi, x, i):
    """Width and slope on a main edge; ``i`` is a hint for the interval."""
    if i < lo or i >= hi:
        i = lo
    while i < hi - 1 and x > tx[i + 1]:
        i += 1
    while i > lo and x < tx[i]:
        i -= 1
    x0 = tx[i]
    h = tx[i + 1] - x0
    t = (x - x0) / h
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    t2 = t * t
    t3 = t2 * t
    y0 = ty[i]
    y1 = ty[i + 1]
    d0 = td[i]
    d1 = td[i + 1]
    val = ((2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * d0
           + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * d1)
    der = ((6 * t2 - 6 * t) * (y0 - y1) / h + (3 * t2 - 4 * t + 1) * d0 + (3 * t2 - 2 * t) * d1)
    return val, der, i


@nb.njit(cache=True)
def _wing_width(q, r, level, rho, x):
    sgn = 1.0 if r > 0 else -1.0
    ext = abs(r)
    e = sgn * (x - q)
    d = ext - e
    if d < 0.0:
        d = 0.0
    if rho <= 0.0 or d >= rho:
        if d > 0.0:
            return level, 0.0
        return 0.0, 0.0
    w = level * math.sqrt(d * (2 * rho - d)) / rho
    if d <= 0.0:
        return 0.0, -sgn * 1e300
    dw = level * (rho - d) / (rho * math.sqrt(d * (2 * rho - d)))
    return w, -sgn * dw


@nb.njit(cache=True)
def _edge_width(pg_e_kind, e_lo, e_hi, w_q, w_r, w_level, w_rho, tx, ty, td, k, x, hint):
    if pg_e_kind[k] == 0:
        return _main_width(tx, ty, td, e_lo[k], e_hi[k], x, hint)
    w, dw = _wing_width(w_q[k], w_r[k], w_level[k], w_rho[k], x)
    return w, dw, hint


@nb.njit(cache=True)
def _scale(mu, y):
    x = 2.0 * mu * y
    if abs(x) < 1e-8:
        return y * (1.0 - 0.5 * x)
    return -math.expm1(-x) / (2.0 * mu)


@nb.njit(cache=True)
def _occupation_numerator(mu, h, S):
    """h/(mu S) - 1/mu, with a series for small mu*h."""
    x = 2.0 * mu * h
    if abs(x) < 1e-3:
        return h + mu * h * h / 3.0 - mu ** 3 * h ** 4 / 45.0
    return (h / S - 1.0) / mu


@nb.njit(cache=True)
def _interval_time(mu, d, h):
    """Expected exit time of (0, h) from d for drift mu."""
    if abs(mu * h) < 1e-6:
        return d * (h - d)
    return (h * _scale(mu, d) / _scale(mu, h) - d) / mu


@nb.njit(cache=True, parallel=True)
def _simulate_paths(seeds, e_a, e_b, e_kind, e_va, e_vb, e_lo, e_hi, w_q, w_r, w_level, w_rho,
                    tx, ty, td, v_x, v_kind, v_deg, v_edge, v_sign, v_alpha, x_left,
                    k0, x0, a, beta, dt, h, clamp, exact_law, bridge, max_steps,
                    rec_paths, rec_every, rec_max, tau, occ, status, rec_x, rec_k, rec_n):
    n_paths = seeds.size
    sq = math.sqrt(dt)
    refl_zone = 6.0 * sq
    for p in nb.prange(n_paths):
        mu = np.zeros(3)
        S = np.zeros(3)
        np.random.seed(seeds[p])
        k = k0
        x = x0
        t = 0.0
        occ0 = 0.0
        occ1 = 0.0
        hint = 0
        st = 0
        nrec = 0
        steps = 0
        if e_kind[k] == 0 and x >= a:
            tau[p] = 0.0
            occ[p, 0] = 0.0
            occ[p, 1] = 0.0
            status[p] = 0
            continue
        pending_resolve = True
        while True:
            # ---- vertex ball resolution
            if pending_resolve:
                pending_resolve = False
                v = -1
                dist = 0.0
                if e_va[k] >= 0 and v_kind[e_va[k]] == 0 and x - e_a[k] < h:
                    v = e_va[k]
                    dist = x - e_a[k]
                elif e_vb[k] >= 0 and v_kind[e_vb[k]] == 0 and e_b[k] - x < h:
                    v = e_vb[k]
                    dist = e_b[k] - x
                if v >= 0:
                    if dist < 0.0:
                        dist = 0.0
                    deg = v_deg[v]
                    xv = v_x[v]
                    for j in range(deg):
                        kj = v_edge[v, j]
                        sj = v_sign[v, j]
                        xe = e_a[kj] if sj > 0 else e_b[kj]
                        lw, dlw, _ = _edge_width(e_kind, e_lo, e_hi, w_q, w_r, w_level, w_rho,
                                                 tx, ty, td, kj, xe, e_lo[kj])
                        dr = 0.0
                        if lw > 0.0:
                            dr = dlw / (2.0 * lw)
                        if dr > clamp:
                            dr = clamp
                        elif dr < -clamp:
                            dr = -clamp
                        mu[j] = sj * (beta + dr)
                        S[j] = _scale(mu[j], h)
                    # entry edge slot
                    jin = 0
                    for j in range(deg):
                        if v_edge[v, j] == k:
                            jin = j
                    at_vertex = True
                    if exact_law and dist > 0.0:
                        ph = _scale(mu[jin], dist) / S[jin]
                        tt = _interval_time(mu[jin], dist, h)
                        if e_kind[k] == 0:
                            occ0 += tt
                        else:
                            occ1 += tt
                        t += tt
                        if np.random.random() < ph:
                            at_vertex = False
                            x = xv + v_sign[v, jin] * h
                    if at_vertex:
                        tot = 0.0
                        for j in range(deg):
                            if exact_law:
                                tot += v_alpha[v, j] / S[j]
                            else:
                                tot += v_alpha[v, j]
                        for j in range(deg):
                            kj = v_edge[v, j]
                            if exact_law:
                                tj = v_alpha[v, j] * _occupation_numerator(mu[j], h, S[j]) / tot
                            else:
                                tj = h * h * v_alpha[v, j] / tot
                            if e_kind[kj] == 0:
                                occ0 += tj
                            else:
                                occ1 += tj
                            t += tj
                        u = np.random.random() * tot
                        acc = 0.0
                        jout = deg - 1
                        for j in range(deg):
                            acc += v_alpha[v, j] / S[j] if exact_law else v_alpha[v, j]
                            if u < acc:
                                jout = j
                                break
                        k = v_edge[v, jout]
                        x = xv + v_sign[v, jout] * h
                        hint = e_lo[k]
            # ---- recording
            if p < rec_paths and steps % rec_every == 0 and nrec < rec_max:
                rec_x[p, nrec] = x
                rec_k[p, nrec] = k
                nrec += 1
            # ---- one Euler step
            lw, dlw, hint = _edge_width(e_kind, e_lo, e_hi, w_q, w_r, w_level, w_rho,
                                        tx, ty, td, k, x, hint)
            dr = 0.0
            if lw > 0.0:
                dr = dlw / (2.0 * lw)
            elif dlw != 0.0:
                dr = clamp if dlw > 0 else -clamp
            if dr > clamp:
                dr = clamp
            elif dr < -clamp:
                dr = -clamp
            xn = x + (beta + dr) * dt + sq * np.random.standard_normal()
            t += dt
            if e_kind[k] == 0:
                occ0 += dt
            else:
                occ1 += dt
            steps += 1
            if not math.isfinite(xn):
                st = 1
                break
            if steps > max_steps:
                st = 2
                break
            if e_kind[k] == 0:
                if xn >= a:
                    break
                if bridge and a - xn < refl_zone and a - x < refl_zone:
                    if np.random.random() < math.exp(-2.0 * (a - x) * (a - xn) / dt):
                        break
                if e_va[k] < 0 and xn < x_left:
                    xn = 2.0 * x_left - xn
            else:
                # reflect at the exterior end
                if e_vb[k] >= 0 and v_kind[e_vb[k]] == 1:
                    b = e_b[k]
                    if xn > b - refl_zone:
                        m = 0.5 * (x + xn + math.sqrt((xn - x) ** 2
                                                      - 2.0 * dt * math.log(1.0 - np.random.random())))
                        if m > b:
                            xn -= m - b
                elif e_va[k] >= 0 and v_kind[e_va[k]] == 1:
                    b = e_a[k]
                    if xn < b + refl_zone:
                        m = 0.5 * (x + xn - math.sqrt((xn - x) ** 2
                                                      - 2.0 * dt * math.log(1.0 - np.random.random())))
                        if m < b:
                            xn += b - m
            x = xn
            # leaving the edge through an ordinary end (window edges handled above)
            if x < e_a[k] and e_va[k] >= 0 and v_kind[e_va[k]] == 0:
                pending_resolve = True
            elif x > e_b[k] and e_vb[k] >= 0 and v_kind[e_vb[k]] == 0:
                pending_resolve = True
            elif e_va[k] >= 0 and v_kind[e_va[k]] == 0 and x - e_a[k] < h:
                pending_resolve = True
            elif e_vb[k] >= 0 and v_kind[e_vb[k]] == 0 and e_b[k] - x < h:
                pending_resolve = True
        tau[p] = t
        occ[p, 0] = occ0
        occ[p, 1] = occ1
        status[p] = st
        if p < rec_paths:
            rec_n[p] = nrec


def path_seeds(seed: int, n: int) -> np.ndarray:
    """Per-path 32-bit seeds derived from one master seed."""
    ss = np.random.SeedSequence(int(seed) & ((1 << 64) - 1))
    return ss.generate_state(n, dtype=np.uint32).astype(np.int64)


def _check_scales(graph: MetricGraph, params: SimParams):
    h = params.h_vertex
    for e in graph.edges:
        ends = [vid for vid in (e.va, e.vb)
                if vid is not None and graph.vertices[vid].kind != "exterior"]
        need = h * len(ends) + (6 * math.sqrt(params.dt) if e.kind == "wing" else 0.0)
        if e.length <= need:
            raise ParameterError(f"edge {e.id} (length {e.length:.4g}) too short for "
                                 f"h_vertex={h:.4g}; reduce dt")


def simulate_exit(graph: MetricGraph, start: GraphPoint, a: float, params: SimParams,
                  record_paths: int = 0, record_every: int = 100,
                  record_max: int = 100000) -> ExitBatch:
    """Simulate ``params.n_paths`` independent paths until the main-line
    coordinate first reaches ``a``.  Deterministic given ``params.seed``."""
    k0, x0 = int(start[0]), float(start[1])
    e0 = graph.edges[k0]
    if not e0.contains(x0):
        raise PreconditionError("start point not on its edge")
    if e0.kind == "main" and x0 > a:
        raise PreconditionError("start must not lie beyond the exit level")
    if not (graph.x_range[0] < a < graph.x_range[1]):
        raise PreconditionError("exit level must lie strictly inside the window")
    for w in graph.spec.wings:
        lo, hi = w.span
        if lo < a < hi:
            raise PreconditionError("a pocket spans the exit level; truncate the window")
    _check_scales(graph, params)
    pg = pack_graph(graph)
    n = params.n_paths
    seeds = path_seeds(params.seed, n)
    tau = np.zeros(n)
    occ = np.zeros((n, 2))
    status = np.zeros(n, dtype=np.int64)
    rp = int(record_paths)
    rec_x = np.zeros((max(rp, 1), record_max if rp else 1))
    rec_k = np.zeros((max(rp, 1), record_max if rp else 1), dtype=np.int64)
    rec_n = np.zeros(max(rp, 1), dtype=np.int64)
    max_steps = int(min(params.max_time / params.dt, 2**62))
    _simulate_paths(seeds, pg.e_a, pg.e_b, pg.e_kind, pg.e_va, pg.e_vb, pg.e_lo, pg.e_hi,
                    pg.w_q, pg.w_r, pg.w_level, pg.w_rho, pg.tx, pg.ty, pg.td, pg.v_x, pg.v_kind,
                    pg.v_deg, pg.v_edge, pg.v_sign, pg.v_alpha, pg.x_left, k0, x0, float(a),
                    float(params.beta), float(params.dt), float(params.h_vertex),
                    float(params.drift_clamp), params.vertex_law == "exact", params.bridge_exit,
                    max_steps, rp, max(1, int(record_every)), int(record_max) if rp else 1,
                    tau, occ, status, rec_x, rec_k, rec_n)
    bad = np.flatnonzero(status != 0)
    if bad.size:
        i = int(bad[0])
        reason = "non-finite state" if status[i] == 1 else "max_time exceeded"
        raise SimulationFault(f"path {i}: {reason}",
                              {"path": i, "status": int(status[i]), "seed": int(seeds[i]),
                               "n_faulty": int(bad.size)})
    paths = []
    for i in range(rp):
        m = int(rec_n[i])
        paths.append(np.column_stack([rec_k[i, :m], rec_x[i, :m]]))
    return ExitBatch(tau, occ[:, 0].copy(), occ[:, 1].copy(), paths)


def mean_exit_time(graph, start, a, params: SimParams) -> MeanEstimate:
    if params.n_paths < 2:
        raise PreconditionError("n_paths must be >= 2")
    return MeanEstimate.from_samples(simulate_exit(graph, start, a, params).tau)


@dataclass(frozen=True)
class OccupationEstimate:
    main: MeanEstimate
    wing: MeanEstimate
    total: MeanEstimate

    @property
    def wing_fraction(self) -> float:
        return self.wing.mean / self.total.mean if self.total.mean > 0 else 0.0


def wing_occupation_fraction(graph, start, a, params: SimParams) -> OccupationEstimate:
    if params.n_paths < 2:
        raise PreconditionError("n_paths must be >= 2")
    b = simulate_exit(graph, start, a, params)
    return OccupationEstimate(MeanEstimate.from_samples(b.occ_main),
                              MeanEstimate.from_samples(b.occ_wing),
                              MeanEstimate.from_samples(b.tau))
