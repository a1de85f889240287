"""Fixed channel shapes: a main channel between two height profiles plus
side pockets ("wings") attached at jumps of the profiles.

Coordinates are unscaled: the physical channel is ``{(x, eps*z)}``, so all
widths here are O(1).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from .errors import GeometryError, ParameterError, RangeError
from .hermite import HermiteTable

DEFAULT_SPACING = 1.0 / 64.0
BOUNDARY_TOL = 1e-9
FORMAT_TAG = "narrowchan.channel/1"


@dataclass(frozen=True)
class WingSpec:
    """A pocket spanning ``[min(q, q+r), max(q, q+r)]`` above or below the main
    channel, attached at ``x = q``.

    The pocket is a flat strip of width ``level`` whose far end is closed by a
    half-ellipse of x-semi-axis ``tip_radius`` (``None`` means ``|r|/10``;
    ``0`` gives a square end).  ``wall`` is the thickness of the separating
    wall between pocket and main channel.
    """

    q: float
    r: float
    side: str = "above"
    level: float = 1.0
    tip_radius: float | None = None
    wall: float = 0.05

    def __post_init__(self):
        for name in ("q", "r", "level", "wall"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.side not in ("above", "below"):
            raise ParameterError(f"wing side must be 'above' or 'below', got {self.side!r}")
        if self.r == 0.0:
            raise ParameterError("wing extent r must be nonzero")
        if not self.level > 0.0:
            raise ParameterError("wing level must be positive")
        if not self.wall > 0.0:
            raise ParameterError("wing wall thickness must be positive")
        rho = abs(self.r) / 10.0 if self.tip_radius is None else float(self.tip_radius)
        if rho < 0.0 or rho > abs(self.r):
            raise ParameterError("tip_radius must lie in [0, |r|]")
        object.__setattr__(self, "tip_radius", rho)

    @property
    def sign(self) -> float:
        return 1.0 if self.r > 0 else -1.0

    @property
    def tip(self) -> float:
        return self.q + self.r

    @property
    def span(self) -> tuple[float, float]:
        return (min(self.q, self.tip), max(self.q, self.tip))

    @property
    def attach_side(self) -> str:
        """Side of ``q`` on which the pocket lies, as a one-sided limit tag."""
        return "right" if self.r > 0 else "left"

    def _tip_distance(self, x):
        """(distance to the tip, inside-span mask), measured from ``q`` so that
        ``x == q`` is always inside."""
        e = self.sign * (np.asarray(x, dtype=float) - self.q)
        ext = abs(self.r)
        inside = (e >= 0.0) & (e <= ext * (1.0 + 4e-16) + 1e-300)
        return np.maximum(ext - e, 0.0), inside

    def width(self, x):
        """Pocket width at ``x``; zero outside the span and at the tip."""
        d, inside = self._tip_distance(x)
        rho = self.tip_radius
        if rho > 0.0:
            dc = np.clip(d, 0.0, rho)
            cap = self.level * np.sqrt(dc * (2.0 * rho - dc)) / rho
            w = np.where(d >= rho, self.level, cap)
        else:
            w = np.where(d > 0.0, self.level, 0.0)
        return np.where(inside, w, 0.0)

    def width_derivative(self, x):
        """d(width)/dx; infinite at a rounded tip, zero on the flat part."""
        d, inside = self._tip_distance(x)
        rho = self.tip_radius
        if rho == 0.0:
            return np.zeros_like(d)
        dc = np.clip(d, 0.0, rho)
        with np.errstate(divide="ignore", invalid="ignore"):
            dw_dd = self.level * (rho - dc) / (rho * np.sqrt(dc * (2.0 * rho - dc)))
        dw_dd = np.where(d >= rho, 0.0, dw_dd)
        return np.where(inside, -self.sign * dw_dd, 0.0)

    def center(self, main_upper, main_lower):
        """z of the pocket's mid-line given the main boundary under it."""
        if self.side == "above":
            return main_upper + self.wall + 0.5 * self.level
        return main_lower - self.wall - 0.5 * self.level

    def interval(self, x, main_upper, main_lower):
        """(bottom, top) of the pocket cross-section at ``x``."""
        w = self.width(x)
        c = self.center(main_upper, main_lower)
        return c - 0.5 * w, c + 0.5 * w

    def to_dict(self):
        return {"q": self.q, "r": self.r, "side": self.side,
                "profile": {"kind": "capped-strip", "level": self.level,
                            "tip_radius": self.tip_radius},
                "wall": self.wall}

    @classmethod
    def from_dict(cls, d):
        prof = d.get("profile", {})
        return cls(q=d["q"], r=d["r"], side=d.get("side", "above"),
                   level=prof.get("level", d.get("level", 1.0)),
                   tip_radius=prof.get("tip_radius", d.get("tip_radius")),
                   wall=d.get("wall", 0.05))


class OneSided(NamedTuple):
    left: float
    right: float

    @property
    def is_jump(self) -> bool:
        return self.left != self.right


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """One fixed channel.  Build with :meth:`from_segments`,
    :meth:`from_functions` or :meth:`constant`."""

    h_plus: HermiteTable
    h_minus: HermiteTable
    wings: tuple[WingSpec, ...] = ()
    l_min: float = 0.0
    l_max: float = math.inf
    a1: float | None = None

    def __post_init__(self):
        if not np.array_equal(self.h_plus.x, self.h_minus.x):
            raise GeometryError("upper and lower profiles must share knots")
        object.__setattr__(self, "wings", tuple(sorted(self.wings, key=lambda w: w.q)))
        if not (0.0 < self.l_min < self.l_max):
            raise ParameterError("need 0 < l_min < l_max")

    # construction -------------------------------------------------------
    @classmethod
    def from_segments(cls, segments, wings=(), l_min=None, l_max=None, a1=None):
        """``segments`` is a list of ``(xs, h_plus_values, h_minus_values)``;
        adjacent segments share their end x, which becomes a jump."""
        hp = HermiteTable.from_segments([(s[0], s[1]) for s in segments])
        hm = HermiteTable.from_segments([(s[0], s[2]) for s in segments])
        lo, hi = hp.combine(hm, -1.0).extremes()
        return cls(hp, hm, tuple(wings),
                   l_min=lo if l_min is None else float(l_min),
                   l_max=hi if l_max is None else float(l_max),
                   a1=None if a1 is None else float(a1))

    @classmethod
    def from_functions(cls, h_plus, h_minus, x_range, jumps=(), spacing=DEFAULT_SPACING,
                       wings=(), l_min=None, l_max=None, a1=None):
        """Tabulate callables on a grid of at most ``spacing``; one-sided
        values at ``jumps`` are taken one ulp inside each segment."""
        x0, x1 = map(float, x_range)
        cuts = [x0] + sorted(float(j) for j in jumps if x0 < j < x1) + [x1]
        segs = []
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(2, int(math.ceil((b - a) / spacing)) + 1)
            xs = np.linspace(a, b, n)
            ev = xs.copy()
            ev[0] = np.nextafter(a, b)
            ev[-1] = np.nextafter(b, a)
            segs.append((xs, np.asarray(h_plus(ev), float) * np.ones(n),
                         np.asarray(h_minus(ev), float) * np.ones(n)))
        return cls.from_segments(segs, wings=wings, l_min=l_min, l_max=l_max, a1=a1)

    @classmethod
    def constant(cls, width, x_range, center=0.0, wings=(), spacing=DEFAULT_SPACING, **kw):
        w = float(width)
        kw.setdefault("l_min", w / 2.0)
        kw.setdefault("l_max", w * 2.0)
        return cls.from_functions(lambda x: center + 0.5 * w + 0 * x,
                                  lambda x: center - 0.5 * w + 0 * x,
                                  x_range, spacing=spacing, wings=wings, **kw)

    @classmethod
    def with_wings(cls, width, x_range, wings=(), jumps=(), spacing=DEFAULT_SPACING,
                   l_min=None, l_max=None, a1=None):
        """Channel of main width ``width`` (callable or number) with pockets.

        The main channel is centred on z = 0 at the left end.  At each wing
        attachment the free side of the main channel is re-centred on the
        mid-line of the wall separating pocket and channel, so that it opens
        into both.  ``jumps`` lists additional width discontinuities.
        """
        wfun = width if callable(width) else (lambda x, c=float(width): c + 0.0 * x)
        x0, x1 = map(float, x_range)
        by_q = {}
        for w in wings:
            if w.q in by_q:
                raise GeometryError(f"two wings attached at x={w.q}")
            by_q[w.q] = w
        cuts = sorted({float(j) for j in jumps if x0 < j < x1} | {q for q in by_q if x0 < q < x1})
        cuts = [x0] + cuts + [x1]
        segs, c = [], 0.0
        prev_right = None
        for a, b in zip(cuts[:-1], cuts[1:]):
            n = max(2, int(math.ceil((b - a) / spacing)) + 1)
            xs = np.linspace(a, b, n)
            ev = xs.copy()
            ev[0] = np.nextafter(a, b)
            ev[-1] = np.nextafter(b, a)
            lv = np.asarray(wfun(ev), float) * np.ones(n)
            w = by_q.get(a)
            if w is not None and prev_right is not None:
                l_left, l_right = prev_right, lv[0]
                if w.r > 0:
                    shift = -(0.5 * l_right + 0.5 * w.wall)
                else:
                    shift = 0.5 * l_left + 0.5 * w.wall
                c = c + (shift if w.side == "above" else -shift)
            segs.append((xs, c + 0.5 * lv, c - 0.5 * lv))
            prev_right = lv[-1]
        return cls.from_segments(segs, wings=wings, l_min=l_min, l_max=l_max, a1=a1)

    # basic queries ------------------------------------------------------
    @property
    def x_range(self) -> tuple[float, float]:
        return self.h_plus.domain

    @cached_property
    def l0(self) -> HermiteTable:
        return self.h_plus.combine(self.h_minus, -1.0)

    @property
    def jumps(self) -> np.ndarray:
        return self.h_plus.jumps

    @property
    def breakpoints(self) -> np.ndarray:
        """Knot locations of the width table (jumps listed once)."""
        return np.unique(self.h_plus.x)

    def check_x(self, x):
        lo, hi = self.x_range
        xa = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(xa)) or np.any(xa < lo) or np.any(xa > hi):
            raise RangeError(f"x outside the channel window [{lo}, {hi}]")

    def wing_at(self, x):
        """Index of the wing whose closed span contains ``x`` or -1."""
        for j, w in enumerate(self.wings):
            a, b = w.span
            if a <= x <= b:
                return j
        return -1

    def wing_interval(self, j, x):
        """Pocket (bottom, top) at ``x`` for wing ``j``."""
        w = self.wings[j]
        s = w.attach_side
        return w.interval(x, float(self.h_plus(x, s)), float(self.h_minus(x, s)))

    # serialization ------------------------------------------------------
    def to_dict(self):
        x = self.h_plus.x
        dup = np.flatnonzero(np.diff(x) == 0)
        keep = np.ones(x.size, bool)
        keep[dup + 1] = False
        return {
            "format": FORMAT_TAG,
            "knots": x[keep].tolist(),
            "h_plus": self.h_plus.y[keep].tolist(),
            "h_minus": self.h_minus.y[keep].tolist(),
            "jumps": [{"x": float(x[i]), "h_plus": float(self.h_plus.y[i + 1]),
                       "h_minus": float(self.h_minus.y[i + 1])} for i in dup],
            "wings": [w.to_dict() for w in self.wings],
            "l_min": self.l_min,
            "l_max": self.l_max,
            "a1": self.a1,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format", FORMAT_TAG) != FORMAT_TAG:
            raise ParameterError(f"unknown channel format {d.get('format')!r}")
        knots = np.asarray(d["knots"], float)
        hp = np.asarray(d["h_plus"], float)
        hm = np.asarray(d["h_minus"], float)
        jumps = sorted(d.get("jumps", []), key=lambda j: j["x"])
        cut = []
        for j in jumps:
            i = int(np.searchsorted(knots, j["x"]))
            if i >= knots.size or knots[i] != j["x"]:
                raise ParameterError(f"jump at {j['x']} is not a knot")
            cut.append(i)
        bounds = [0] + cut + [knots.size - 1]
        segs = []
        for k in range(len(bounds) - 1):
            s, e = bounds[k], bounds[k + 1]
            up, down = hp[s:e + 1].copy(), hm[s:e + 1].copy()
            if k > 0:
                up[0], down[0] = jumps[k - 1]["h_plus"], jumps[k - 1]["h_minus"]
            segs.append((knots[s:e + 1], up, down))
        wings = tuple(WingSpec.from_dict(w) for w in d.get("wings", []))
        return cls.from_segments(segs, wings=wings, l_min=d["l_min"], l_max=d["l_max"],
                                 a1=d.get("a1"))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "ChannelSpec":
        return cls.from_dict(json.loads(text))


# public operations ------------------------------------------------------
def cross_section(spec: ChannelSpec, x: float, side: str = "right"):
    """Connected components of the cross-section at ``x``.

    The main component comes first.  At a jump, ``side`` picks which one-sided
    limit of the main profiles is used.  A pocket of zero width (its tip) is
    omitted.
    """
    spec.check_x(x)
    x = float(x)
    out = [(float(spec.h_minus(x, side)), float(spec.h_plus(x, side)))]
    for j, w in enumerate(spec.wings):
        a, b = w.span
        if not (a <= x <= b):
            continue
        if x == w.q and side != w.attach_side:
            continue
        lo, hi = spec.wing_interval(j, x)
        if hi > lo:
            out.append((float(lo), float(hi)))
    return out


def width_l0(spec: ChannelSpec, x: float) -> OneSided:
    """Main-channel width at ``x`` as (left limit, right limit)."""
    spec.check_x(x)
    return OneSided(float(spec.l0(x, "left")), float(spec.l0(x, "right")))


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.hypot(v[0], v[1])


def boundary_normal(spec: ChannelSpec, point, arc: str):
    """Inward unit normal on a smooth boundary arc.

    ``arc`` is ``"upper"``, ``"lower"``, ``"wing<j>:top"`` or
    ``"wing<j>:bottom"``.
    """
    x, z = map(float, point)
    spec.check_x(x)
    if arc in ("upper", "lower"):
        h = spec.h_plus if arc == "upper" else spec.h_minus
        for side in ("right", "left"):
            if abs(float(h(x, side)) - z) <= BOUNDARY_TOL:
                s = float(h.derivative(x, side))
                return _unit((s, -1.0)) if arc == "upper" else _unit((-s, 1.0))
        raise GeometryError(f"point ({x}, {z}) is not on the {arc} boundary")
    if arc.startswith("wing") and ":" in arc:
        head, part = arc.split(":", 1)
        try:
            j = int(head[4:])
            w = spec.wings[j]
        except (ValueError, IndexError):
            raise GeometryError(f"unknown arc {arc!r}") from None
        a, b = w.span
        if not (a <= x <= b) or part not in ("top", "bottom"):
            raise GeometryError(f"point ({x}, {z}) is not on arc {arc!r}")
        lo, hi = spec.wing_interval(j, x)
        target = hi if part == "top" else lo
        if abs(target - z) > BOUNDARY_TOL:
            raise GeometryError(f"point ({x}, {z}) is not on arc {arc!r}")
        s = w.attach_side
        d = w.sign * (w.tip - x)
        if d <= 0.0 or (w.tip_radius == 0.0 and d <= BOUNDARY_TOL):
            return np.array([-w.sign, 0.0])
        hs = spec.h_plus if w.side == "above" else spec.h_minus
        base_slope = float(hs.derivative(x, s))
        half = 0.5 * float(w.width_derivative(x))
        if not np.isfinite(half):
            return np.array([-w.sign, 0.0])
        if part == "top":
            return _unit((base_slope + half, -1.0))
        return _unit((-(base_slope - half), 1.0))
    raise GeometryError(f"unknown arc {arc!r}")


class AssumptionCheck(NamedTuple):
    name: str
    passed: bool
    x: float | None = None
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        lines = []
        for c in self.checks:
            flag = "pass" if c.passed else "FAIL"
            where = "" if c.x is None else f" at x={c.x:.6g}"
            lines.append(f"{flag} {c.name}{where} {c.detail}".rstrip())
        return "\n".join(lines)


def _overlap(i1, i2):
    return min(i1[1], i2[1]) - max(i1[0], i2[0])


def validate_assumptions(spec: ChannelSpec, probe_spacing: float = 1.0 / 128.0,
                         rel_tol: float = 1e-12) -> ValidationReport:
    """Check width bounds, cross-section structure and wing placement."""
    checks = []
    lo, hi = spec.x_range
    tol = rel_tol * max(1.0, spec.l_max)

    # width bounds, exact on the interpolant
    wmin, wmax = spec.l0.extremes()
    if wmin < spec.l_min - tol or wmax > spec.l_max + tol:
        n = max(2, int((hi - lo) / probe_spacing) + 1)
        xs = np.concatenate([np.linspace(lo, hi, n), spec.l0.x])
        vals = np.concatenate([spec.l0(xs[:n]), spec.l0.y])
        bad = np.flatnonzero((vals < spec.l_min - tol) | (vals > spec.l_max + tol))
        where = float(xs[bad[0]]) if bad.size else None
        checks.append(AssumptionCheck("width_bounds", False, where,
                                      f"width range [{wmin:.6g}, {wmax:.6g}] outside "
                                      f"[{spec.l_min:.6g}, {spec.l_max:.6g}]"))
    else:
        checks.append(AssumptionCheck("width_bounds", True))

    # horizontal normals: jump verticals and wing tips, finitely many and distinct
    special = np.sort(np.concatenate([spec.jumps, [w.tip for w in spec.wings]]))
    gaps = np.diff(np.unique(special))
    if gaps.size and gaps.min() <= 0.0:
        checks.append(AssumptionCheck("isolated_horizontal_normals", False))
    else:
        checks.append(AssumptionCheck("isolated_horizontal_normals", True,
                                      detail=f"{np.unique(special).size} points"))

    # one or two components: no two wings over the same x
    spans = sorted(w.span for w in spec.wings)
    bad_x = None
    for (a0, b0), (a1_, b1) in zip(spans[:-1], spans[1:]):
        if a1_ < b0:
            bad_x = 0.5 * (a1_ + min(b0, b1))
            break
    checks.append(AssumptionCheck("one_or_two_components", bad_x is None, bad_x,
                                  "" if bad_x is None else "wing spans overlap"))

    # wing placement
    jumps = set(spec.jumps.tolist())
    for j, w in enumerate(spec.wings):
        a, b = w.span
        name = f"wing{j}"
        if a < lo or b > hi:
            checks.append(AssumptionCheck(f"{name}_inside_window", False, w.q))
            continue
        if spec.a1 is not None and (abs(w.r) > spec.a1 + tol or w.level > spec.a1 + tol):
            checks.append(AssumptionCheck(f"{name}_size_bound", False, w.q,
                                          f"|r|={abs(w.r):.6g}, level={w.level:.6g}, "
                                          f"A1={spec.a1:.6g}"))
        inner = [xj for xj in jumps if a < xj < b]
        if inner:
            checks.append(AssumptionCheck(f"{name}_smooth_base", False, inner[0],
                                          "main profile jumps under the wing"))
        if w.q not in jumps:
            checks.append(AssumptionCheck(f"{name}_attachment", False, w.q,
                                          "wing not attached at a jump"))
            continue
        left = (float(spec.h_minus(w.q, "left")), float(spec.h_plus(w.q, "left")))
        right = (float(spec.h_minus(w.q, "right")), float(spec.h_plus(w.q, "right")))
        free, under = (left, right) if w.r > 0 else (right, left)
        pocket = spec.wing_interval(j, w.q)
        ok = _overlap(free, under) > 0.0 and _overlap(free, pocket) > 0.0
        checks.append(AssumptionCheck(f"{name}_attachment", ok, None if ok else w.q,
                                      "" if ok else "pocket or main not reachable at the jump"))

    # plain jumps must connect
    wing_q = {w.q for w in spec.wings}
    bad = None
    for xj in sorted(jumps - wing_q):
        left = (float(spec.h_minus(xj, "left")), float(spec.h_plus(xj, "left")))
        right = (float(spec.h_minus(xj, "right")), float(spec.h_plus(xj, "right")))
        if _overlap(left, right) <= 0.0:
            bad = xj
            break
    checks.append(AssumptionCheck("plain_jump_overlap", bad is None, bad))
    return ValidationReport(checks)
