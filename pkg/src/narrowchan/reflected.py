"""Finite-epsilon Monte Carlo of the reflected diffusion in the channel.

The state ``(x, z)`` lives in unscaled coordinates.  Each Euler step adds
``(V dt + sqrt(dt) xi1, sqrt(dt) xi2 / eps)``.  An overshoot past a boundary
arc is corrected along the co-normal ``(eps n1, n2)``: mirrored back into the
channel by default, or placed on the arc (``boundary="project"``, and always
in :func:`step_project`).  Vertical walls (the end faces at jumps, the pocket
walls, square tips and the window ends) correct horizontally.  Rounded pocket
tips are projected radially onto their half-ellipse.  Crossing a jump line is resolved exactly: the step
segment is intersected with the line and the state changes component when
the intersection height lies in an open component on the far side.

The accumulated correction length is measured in the physical (z scaled by
``eps``) frame, where it approximates the boundary local time of the
physical process.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np
from scipy import stats

from .errors import (GeometryError, ParameterError, PreconditionError, SimulationFault,
                     StepTooLargeError)
from .geometry import ChannelSpec, cross_section
from .graph import build_graph, locate
from .graph_mc import MeanEstimate, SimParams, _wing_width, path_seeds, simulate_exit

V_KINDS = ("constant", "modulated")


@dataclass(frozen=True)
class VelocityField:
    """``V = beta`` or ``V = beta (1 + amplitude cos(2 pi s))`` where ``s`` is
    the relative height inside the current cross-section component, so the
    cross-section average is ``beta`` either way."""

    beta: float = 1.0
    kind: str = "constant"
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in V_KINDS:
            raise ParameterError(f"velocity kind must be one of {V_KINDS}")
        if not self.beta > 0:
            raise ParameterError("beta must be positive")
        if self.kind == "modulated" and not (0.0 <= self.amplitude < 1.0):
            raise ParameterError("modulation amplitude must lie in [0, 1)")

    def to_dict(self):
        return {"beta": self.beta, "kind": self.kind, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d.get("beta", 1.0)), d.get("kind", "constant"),
                   float(d.get("amplitude", 0.0)))


@dataclass(frozen=True)
class SdeParams:
    """``dt`` defaults to ``epsilon**2 / 100``; ``noise_substeps`` sums that
    many base increments per step, so runs with different ``dt`` but the same
    seed share their driving noise.  ``corner_rounding`` (default: a
    twentieth of the narrowest main width) is the distance from a jump or an
    attachment inside which boundary corrections are made vertically.
    ``boundary`` is ``"reflect"`` (mirror overshoots back into the channel)
    or ``"project"`` (place them on the boundary)."""

    epsilon: float
    dt: float | None = None
    velocity: VelocityField = VelocityField()
    seed: int = 0
    n_paths: int = 1000
    corner_rounding: float | None = None
    noise_substeps: int = 1
    bridge_exit: bool = True
    max_time: float = 1e5
    boundary: str = "reflect"

    def __post_init__(self):
        if not (0.0 < self.epsilon <= 1.0):
            raise ParameterError("epsilon must lie in (0, 1]")
        if self.dt is None:
            object.__setattr__(self, "dt", self.epsilon ** 2 / 100.0)
        if not (0.0 < self.dt <= self.epsilon ** 2 / 10.0 * (1 + 1e-12)):
            raise ParameterError("dt must satisfy 0 < dt <= epsilon**2 / 10")
        if self.noise_substeps < 1:
            raise ParameterError("noise_substeps must be >= 1")
        if self.n_paths < 1:
            raise ParameterError("n_paths must be >= 1")
        if self.corner_rounding is not None and self.corner_rounding < 0:
            raise ParameterError("corner_rounding must be nonnegative")
        if self.boundary not in ("reflect", "project"):
            raise ParameterError("boundary must be 'reflect' or 'project'")

    @property
    def beta(self) -> float:
        return self.velocity.beta

    @classmethod
    def coupled(cls, epsilon, base_dt, **kw):
        """Parameters whose step is a whole number of ``base_dt`` steps."""
        m = max(1, int(round(epsilon ** 2 / 100.0 / base_dt)))
        return cls(epsilon=epsilon, dt=m * base_dt, noise_substeps=m, **kw)


@dataclass
class ReflectedPath:
    """``samples`` has columns ``x, z, push`` (thinned); ``push`` is the
    running correction length."""

    sigma: float
    push: float
    samples: np.ndarray | None = None


@dataclass
class ReflectedBatch:
    sigma: np.ndarray
    push: np.ndarray
    paths: list = field(default_factory=list)

    def __len__(self):
        return self.sigma.size

    def __getitem__(self, i) -> ReflectedPath:
        s = self.paths[i] if i < len(self.paths) else None
        return ReflectedPath(float(self.sigma[i]), float(self.push[i]), s)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def rows(self):
        for i in range(len(self)):
            yield {"path": i, "sigma": float(self.sigma[i]), "push": float(self.push[i])}


# --------------------------------------------------------------------- packing
def _narrowest(spec: ChannelSpec) -> float:
    """Smallest main-channel width over the window."""
    return float(spec.l0.extremes()[0])


def _pack(spec: ChannelSpec):
    hp, hm = spec.h_plus, spec.h_minus
    x = hp.x
    jx = np.asarray(spec.jumps, dtype=float)
    jwing = -np.ones(max(jx.size, 1), dtype=np.int64)
    nw = len(spec.wings)
    w = np.zeros((max(nw, 1), 7))
    for j, wing in enumerate(spec.wings):
        hits = np.flatnonzero(jx == wing.q)
        if hits.size == 0:
            raise GeometryError(f"wing {j} is not attached at a width jump")
        jwing[hits[0]] = j
        w[j] = (wing.q, wing.r, 1.0 if wing.side == "above" else -1.0, wing.level,
                wing.tip_radius, wing.wall, 1.0 if wing.r > 0 else -1.0)
    # uniform cells over the knots; lut[k] = first knot at or past cell k
    x = np.ascontiguousarray(x)
    n_cell = max(1, x.size - 1)
    cell = (x[-1] - x[0]) / n_cell
    lut = np.searchsorted(x, x[0] + cell * np.arange(n_cell + 1), side="left")
    lims = np.array([spec.x_range[0], spec.x_range[1], _narrowest(spec), x[0], 1.0 / cell])
    return (x, np.ascontiguousarray(hp.y), np.ascontiguousarray(hp.d),
            np.ascontiguousarray(hm.y), np.ascontiguousarray(hm.d), jx, jwing, w, lims,
            lut.astype(np.int64))


def _component(spec: ChannelSpec, point) -> int:
    """-1 for the main channel, the wing index otherwise."""
    x, z = map(float, point)
    spec.check_x(x)
    lo, hi = cross_section(spec, x)[0]
    if lo <= z <= hi:
        return -1
    j = spec.wing_at(x)
    if j >= 0:
        wlo, whi = spec.wing_interval(j, x)
        if wlo <= z <= whi:
            return j
    raise GeometryError(f"point ({x}, {z}) is outside the channel")


# --------------------------------------------------------------------- kernels
@nb.njit(cache=True, inline="always")
def _bisect(a, x, right, lo=0, hi=-1):
    """``np.searchsorted(a, x, side="right" if right else "left")``, given
    that the answer lies in ``[lo, hi]``."""
    if hi < 0:
        hi = a.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x or (right and a[mid] == x):
            lo = mid + 1
        else:
            hi = mid
    return lo


@nb.njit(cache=True, inline="always")
def _knot(tx, lut, lims, x, right):
    # one cell of slack on each side absorbs rounding in the cell index
    n_cell = lut.size - 1
    f = math.floor((x - lims[3]) * lims[4])
    if not f < n_cell + 2:
        f = n_cell + 2
    k = int(f) if f > -2 else -2
    lo = lut[k - 1] if 1 <= k <= n_cell + 1 else 0
    if k > n_cell + 1:
        lo = lut[n_cell]
    hi = lut[k + 2] if 0 <= k + 2 <= n_cell else tx.size
    if k + 2 < 0:
        hi = lut[0]
    return _bisect(tx, x, right, lo, hi)


@nb.njit(cache=True, inline="always")
def _herm(tx, ty, td, i, x, right):
    n = tx.size
    i = i - 1
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    h = tx[i + 1] - tx[i]
    if h <= 0.0:
        i = i + 1 if right else i - 1
        h = tx[i + 1] - tx[i]
    t = (x - tx[i]) / h
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
    der = (6 * t2 - 6 * t) * (y0 - y1) / h + (3 * t2 - 4 * t + 1) * d0 + (3 * t2 - 2 * t) * d1
    return val, der


@nb.njit(cache=True, inline="always")
def _bounds(G, c, x, right):
    """(lo, hi, lo slope, hi slope, centre) of component ``c`` at ``x``."""
    tx, hpy, hpd, hmy, hmd, jx, jwing, W, lims, lut = G
    if c < 0:
        i = _knot(tx, lut, lims, x, right)
        hi, shi = _herm(tx, hpy, hpd, i, x, right)
        lo, slo = _herm(tx, hmy, hmd, i, x, right)
        return lo, hi, slo, shi, 0.5 * (lo + hi)
    q, r, side, level, rho, wall, sg = W[c, 0], W[c, 1], W[c, 2], W[c, 3], W[c, 4], W[c, 5], W[c, 6]
    if side > 0:
        m, dm = _herm(tx, hpy, hpd, _knot(tx, lut, lims, x, sg > 0), x, sg > 0)
        cen = m + wall + 0.5 * level
    else:
        m, dm = _herm(tx, hmy, hmd, _knot(tx, lut, lims, x, sg > 0), x, sg > 0)
        cen = m - wall - 0.5 * level
    w, dw = _wing_width(q, r, level, rho, x)
    return cen - 0.5 * w, cen + 0.5 * w, dm - 0.5 * dw, dm + 0.5 * dw, cen


@nb.njit(cache=True, inline="always")
def _stretch(G, c, x):
    """x-range of the jump-free stretch (main) or the pocket span holding ``x``."""
    tx, hpy, hpd, hmy, hmd, jx, jwing, W, lims, lut = G
    if c < 0:
        i = _bisect(jx, x, True)
        lo = jx[i - 1] if i > 0 else lims[0]
        hi = jx[i] if i < jx.size else lims[1]
        if i > 0 and jx[i - 1] == x:
            lo = x
        return lo, hi
    q = W[c, 0]
    t = q + W[c, 1]
    return (q, t) if t > q else (t, q)


@nb.njit(cache=True)
def _step(G, x, z, c, dx, dz, eps, corner, mirror):
    """One constrained move: overshoots are projected back along the
    co-normal, or mirrored across the boundary when ``mirror`` is set.
    Returns (x, z, component, push)."""
    tx, hpy, hpd, hmy, hmd, jx, jwing, W, lims, lut = G
    push = 0.0
    xt = x + dx
    zt = z + dz
    # ---- vertical lines: jumps, attachments, square tips, window ends
    for _ in range(16):
        if xt == x:
            break
        dirn = 1.0 if xt > x else -1.0
        b = math.nan
        kind = 0  # 1 jump (main), 2 window end, 3 attachment (wing), 4 square tip
        ji = -1
        if c < 0:
            if dirn > 0:
                i = _bisect(jx, x, True)
                if i < jx.size and jx[i] < xt:
                    b = jx[i]
                    kind = 1
                    ji = i
                if xt > lims[1] and not (kind == 1 and b < lims[1]):
                    b = lims[1]
                    kind = 2
            else:
                i = _bisect(jx, x, False) - 1
                if i >= 0 and jx[i] > xt:
                    b = jx[i]
                    kind = 1
                    ji = i
                if xt < lims[0] and not (kind == 1 and b > lims[0]):
                    b = lims[0]
                    kind = 2
        else:
            q, sg, rho = W[c, 0], W[c, 6], W[c, 4]
            tip = q + W[c, 1]
            if sg * (xt - q) < 0.0:
                b = q
                kind = 3
            elif rho <= 0.0 and sg * (xt - tip) > 0.0:
                b = tip
                kind = 4
        if kind == 0:
            break
        f = (b - x) / (xt - x)
        zb = z + f * (zt - z)
        newc = -2
        if kind == 1:
            lo, hi, _, _, _ = _bounds(G, -1, b, dirn > 0)
            if lo <= zb <= hi:
                newc = -1
            else:
                j = jwing[ji]
                if j >= 0 and W[j, 6] * dirn > 0:
                    lo, hi, _, _, _ = _bounds(G, j, b, dirn > 0)
                    if lo <= zb <= hi:
                        newc = j
        elif kind == 3:
            lo, hi, _, _, _ = _bounds(G, -1, b, dirn > 0)
            if lo <= zb <= hi:
                newc = -1
        if newc != -2:
            x = b
            z = zb
            c = newc
            continue
        # blocked by a vertical wall: horizontal co-normal
        over = abs(xt - b)
        if mirror:
            over = min(over, abs(b - x))
            push += 2.0 * over
            xt = b - dirn * over
            if xt == b:
                xt = b - dirn * 1e-12 * max(1.0, abs(b))
        else:
            push += over
            xt = b - dirn * 1e-12 * max(1.0, abs(b))
            if dirn * (xt - x) < 0.0:
                xt = x
        break
    # never rest exactly on a jump line
    if c < 0:
        i = _bisect(jx, xt, False)
        if i < jx.size and jx[i] == xt:
            xt = xt + (1e-12 * max(1.0, abs(xt)) if xt >= x else -1e-12 * max(1.0, abs(xt)))
    else:
        q = W[c, 0]
        if xt == q:
            xt = q + W[c, 6] * 1e-12 * max(1.0, abs(q))
    # ---- rounded pocket tip
    if c >= 0:
        q, r, side, level, rho, wall, sg = (W[c, 0], W[c, 1], W[c, 2], W[c, 3], W[c, 4],
                                            W[c, 5], W[c, 6])
        d = abs(r) - sg * (xt - q)
        if rho > 0.0 and d < rho:
            xc = q + r - sg * rho
            _, _, _, _, zc = _bounds(G, c, xc, sg > 0)
            u = (xt - xc) / rho
            v = (zt - zc) / (0.5 * level)
            r2 = u * u + v * v
            if r2 > 1.0:
                k = 1.0 / math.sqrt(r2)
                xn = xc + k * u * rho
                zn = zc + k * v * 0.5 * level
                push += math.sqrt((xn - xt) ** 2 + (eps * (zn - zt)) ** 2)
                xt = xn
                zt = zn
            lo, hi, _, _, _ = _bounds(G, c, xt, sg > 0)
            if zt > hi:
                zt = hi
            elif zt < lo:
                zt = lo
            return xt, zt, c, push
    # ---- smooth arcs: co-normal projection
    right = True if c < 0 else W[c, 6] > 0
    lo, hi, slo, shi, _ = _bounds(G, c, xt, right)
    if lo <= zt <= hi:
        return xt, zt, c, push
    sl, sr = _stretch(G, c, xt)
    pad = 1e-12 * max(1.0, abs(sl), abs(sr))
    near_corner = (xt - sl < corner) or (sr - xt < corner)
    upper = zt > hi
    s = shi if upper else slo
    if near_corner or not math.isfinite(s):
        s = 0.0
    # solve zt -/+ t = boundary(xt + eps s t) for the co-normal distance t
    tpar = (zt - hi) if upper else (lo - zt)
    xn = xt
    for _ in range(4):
        xn = xt + (eps * s * tpar if upper else -eps * s * tpar)
        if xn < sl + pad:
            xn = sl + pad
        elif xn > sr - pad:
            xn = sr - pad
        lo2, hi2, slo2, shi2, _ = _bounds(G, c, xn, right)
        if upper:
            g = zt - tpar - hi2
            dg = 1.0 + eps * s * shi2
        else:
            g = lo2 - zt - tpar
            dg = 1.0 + eps * s * slo2
        if not (dg > 0.5 and math.isfinite(dg)):
            dg = 1.0
        tpar += g / dg
        if tpar < 0.0:
            tpar = 0.0
    xn = xt + (eps * s * tpar if upper else -eps * s * tpar)
    if xn < sl + pad:
        xn = sl + pad
    elif xn > sr - pad:
        xn = sr - pad
    if mirror:
        xm = 2.0 * xn - xt
        zm = zt - 2.0 * tpar if upper else zt + 2.0 * tpar
        if sl + pad <= xm <= sr - pad:
            lo3, hi3, _, _, _ = _bounds(G, c, xm, right)
            if lo3 <= zm <= hi3:
                push += 2.0 * eps * tpar * math.sqrt(1.0 + s * s)
                return xm, zm, c, push
    push += eps * tpar * math.sqrt(1.0 + s * s)
    xt = xn
    zt = zt - tpar if upper else zt + tpar
    lo, hi, _, _, _ = _bounds(G, c, xt, right)
    if zt > hi:
        zt = hi
    elif zt < lo:
        zt = lo
    return xt, zt, c, push


@nb.njit(cache=True)
def _mix64(s):
    """splitmix64 step; returns (new state, uniform in [0, 1))."""
    s = (s + np.uint64(0x9E3779B97F4A7C15))
    zz = s
    zz = (zz ^ (zz >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    zz = (zz ^ (zz >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    zz = zz ^ (zz >> np.uint64(31))
    return s, float(zz >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@nb.njit(cache=True, parallel=True)
def _simulate(seeds, G, x0, z0, c0, a, eps, dt, m, beta, vkind, amp, corner, bridge, mirror,
              max_steps, rec_paths, rec_every, rec_max, sigma, push, status, rec, rec_n):
    n = seeds.size
    sq = math.sqrt(dt / m)
    sdt = math.sqrt(dt)
    lmin = G[8][2]
    zone = 6.0 * sdt
    for p in nb.prange(n):
        np.random.seed(seeds[p])
        bst = np.uint64(seeds[p]) * np.uint64(0x2545F4914F6CDD1D) + np.uint64(1)
        x = x0
        z = z0
        c = c0
        t = 0.0
        acc = 0.0
        st = 0
        nrec = 0
        steps = 0
        if c < 0 and x >= a:
            sigma[p] = 0.0
            push[p] = 0.0
            status[p] = 0
            if p < rec_paths:
                rec[p, 0, 0] = x
                rec[p, 0, 1] = z
                rec[p, 0, 2] = 0.0
                rec_n[p] = 1
            continue
        while True:
            if p < rec_paths and steps % rec_every == 0 and nrec < rec_max:
                rec[p, nrec, 0] = x
                rec[p, nrec, 1] = z
                rec[p, nrec, 2] = acc
                nrec += 1
            w1 = 0.0
            w2 = 0.0
            for _ in range(m):
                w1 += np.random.standard_normal()
                w2 += np.random.standard_normal()
            v = beta
            if vkind == 1:
                right = True if c < 0 else G[7][c, 6] > 0
                lo, hi, _, _, _ = _bounds(G, c, x, right)
                if hi > lo:
                    v = beta * (1.0 + amp * math.cos(2.0 * math.pi * (z - lo) / (hi - lo)))
            dx = v * dt + sq * w1
            dz = sq * w2 / eps
            if abs(dx) > lmin or abs(dz) > lmin:
                st = 3
                break
            xp = x
            cp = c
            x, z, c, dp = _step(G, x, z, c, dx, dz, eps, corner, mirror)
            acc += dp
            t += dt
            steps += 1
            if not (math.isfinite(x) and math.isfinite(z)):
                st = 1
                break
            if c < 0 and x >= a:
                break
            if bridge and c < 0 and cp < 0 and a - x < zone and a - xp < zone:
                bst, u = _mix64(bst)
                if u < math.exp(-2.0 * (a - xp) * (a - x) / dt):
                    break
            if steps > max_steps:
                st = 2
                break
        if p < rec_paths and nrec < rec_max:
            rec[p, nrec, 0] = x
            rec[p, nrec, 1] = z
            rec[p, nrec, 2] = acc
            nrec += 1
        sigma[p] = t
        push[p] = acc
        status[p] = st
        if p < rec_paths:
            rec_n[p] = nrec


_FAULTS = {1: "non-finite state", 2: "max_time exceeded", 3: "step larger than channel width"}


def _corner(spec: ChannelSpec, params: SdeParams) -> float:
    return _narrowest(spec) / 20.0 if params.corner_rounding is None else float(params.corner_rounding)


def step_project(spec: ChannelSpec, point, displacement, epsilon: float,
                 boundary: str = "project"):
    """Move ``point`` by ``displacement`` (unscaled coordinates) and project
    back into the closed channel (or mirror, with ``boundary="reflect"``).
    Returns ``((x, z), push)``."""
    if not (0.0 < epsilon <= 1.0):
        raise ParameterError("epsilon must lie in (0, 1]")
    if boundary not in ("reflect", "project"):
        raise ParameterError("boundary must be 'reflect' or 'project'")
    dx, dz = map(float, displacement)
    lmin = _narrowest(spec)
    if abs(dx) > lmin or abs(dz) > lmin:
        raise StepTooLargeError("displacement exceeds the channel width; shrink dt",
                                {"displacement": (dx, dz), "width": lmin})
    c = _component(spec, point)
    x, z, _, p = _step(_pack(spec), float(point[0]), float(point[1]), c, dx, dz,
                       float(epsilon), lmin / 20.0, boundary == "reflect")
    return (float(x), float(z)), float(p)


def simulate_exit_2d(spec: ChannelSpec, start, a: float, params: SdeParams,
                     record_paths: int = 0, record_every: int = 100,
                     record_max: int = 100000) -> ReflectedBatch:
    """Exit times ``sigma`` of the main-line coordinate through ``x = a`` for
    ``params.n_paths`` independent paths started at ``start``."""
    x0, z0 = map(float, start)
    c0 = _component(spec, (x0, z0))
    if x0 > a:
        raise PreconditionError("start must not lie beyond the exit level")
    if not (spec.x_range[0] < a < spec.x_range[1]):
        raise PreconditionError("exit level must lie strictly inside the window")
    for w in spec.wings:
        lo, hi = w.span
        if lo < a < hi:
            raise PreconditionError("a pocket spans the exit level; truncate the window")
    G = _pack(spec)
    n = params.n_paths
    seeds = path_seeds(params.seed, n)
    sigma = np.zeros(n)
    push = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)
    rp = int(record_paths)
    rmax = int(record_max) if rp else 1
    rec = np.zeros((max(rp, 1), rmax, 3))
    rec_n = np.zeros(max(rp, 1), dtype=np.int64)
    vel = params.velocity
    max_steps = int(min(params.max_time / params.dt, 2**62))
    _simulate(seeds, G, x0, z0, c0, float(a), float(params.epsilon), float(params.dt),
              int(params.noise_substeps), float(vel.beta), 1 if vel.kind == "modulated" else 0,
              float(vel.amplitude), _corner(spec, params), bool(params.bridge_exit),
              params.boundary == "reflect", max_steps,
              rp, max(1, int(record_every)), rmax, sigma, push, status, rec, rec_n)
    bad = np.flatnonzero(status != 0)
    if bad.size:
        i = int(bad[0])
        diag = {"path": i, "status": int(status[i]), "seed": int(seeds[i]),
                "n_faulty": int(bad.size), "dt": params.dt, "epsilon": params.epsilon}
        cls = StepTooLargeError if status[i] == 3 else SimulationFault
        raise cls(f"path {i}: {_FAULTS[int(status[i])]}", diag)
    paths = [rec[i, :int(rec_n[i])].copy() for i in range(rp)]
    return ReflectedBatch(sigma, push, paths)


@dataclass(frozen=True)
class ComparisonReport:
    sde: MeanEstimate
    graph: MeanEstimate
    ks_statistic: float
    ks_pvalue: float
    epsilon: float
    beta: float

    def to_dict(self):
        return {"epsilon": self.epsilon, "beta": self.beta,
                "sde_mean": self.sde.mean, "sde_stderr": self.sde.stderr,
                "sde_ci": [self.sde.ci_low, self.sde.ci_high], "sde_n": self.sde.n,
                "graph_mean": self.graph.mean, "graph_stderr": self.graph.stderr,
                "graph_ci": [self.graph.ci_low, self.graph.ci_high], "graph_n": self.graph.n,
                "ks_statistic": self.ks_statistic, "ks_pvalue": self.ks_pvalue}


def compare_to_graph(spec: ChannelSpec, start, a: float, sde_params: SdeParams,
                     graph_params: SimParams) -> ComparisonReport:
    """Exit-time distributions of the 2-D process and of its graph limit."""
    if not math.isclose(sde_params.beta, graph_params.beta, rel_tol=1e-12):
        raise PreconditionError(f"drift mismatch: velocity average {sde_params.beta} vs "
                                f"graph drift {graph_params.beta}")
    s = simulate_exit_2d(spec, start, a, sde_params).sigma
    graph = build_graph(spec)
    g = simulate_exit(graph, locate(graph, start), a, graph_params).tau
    ks = stats.ks_2samp(s, g)
    return ComparisonReport(MeanEstimate.from_samples(s), MeanEstimate.from_samples(g),
                            float(ks.statistic), float(ks.pvalue), float(sde_params.epsilon),
                            float(sde_params.beta))
