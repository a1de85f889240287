"""Piecewise cubic Hermite tables with explicit jumps.

A table is a sorted knot array in which a jump at ``x`` appears as a
repeated knot: the first copy carries the left limit, the second copy the
right limit.  Between jumps the interpolant is monotone cubic (Fritsch-Carlson
slopes, the same rule as ``scipy.interpolate.PchipInterpolator``).
"""

from __future__ import annotations

import numpy as np


def pchip_slopes(x, y):
    """Fritsch-Carlson slopes for one continuous segment."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("a segment needs at least two knots")
    h = np.diff(x)
    m = np.diff(y) / h
    if n == 2:
        return np.array([m[0], m[0]])
    d = np.zeros(n)
    w1 = 2.0 * h[1:] + h[:-1]
    w2 = h[1:] + 2.0 * h[:-1]
    same = (m[:-1] * m[1:]) > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        hm = (w1 + w2) / (w1 / m[:-1] + w2 / m[1:])
    d[1:-1] = np.where(same, hm, 0.0)
    d[0] = _edge_slope(h[0], h[1], m[0], m[1])
    d[-1] = _edge_slope(h[-1], h[-2], m[-1], m[-2])
    return d


def _edge_slope(h0, h1, m0, m1):
    d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1)
    if np.sign(d) != np.sign(m0):
        return 0.0
    if np.sign(m0) != np.sign(m1) and abs(d) > abs(3.0 * m0):
        return 3.0 * m0
    return d


class HermiteTable:
    """Callable piecewise cubic with knots ``x``, values ``y``, slopes ``d``.

    ``side="right"`` (default) returns right limits at jumps, ``side="left"``
    returns left limits.  Evaluation outside ``[x[0], x[-1]]`` extrapolates
    the end cubic; callers are expected to range-check.
    """

    __slots__ = ("x", "y", "d")

    def __init__(self, x, y, d):
        self.x = np.ascontiguousarray(x, dtype=float)
        self.y = np.ascontiguousarray(y, dtype=float)
        self.d = np.ascontiguousarray(d, dtype=float)
        if not (self.x.shape == self.y.shape == self.d.shape) or self.x.ndim != 1:
            raise ValueError("knots, values and slopes must be 1-d of equal length")
        if self.x.size < 2:
            raise ValueError("need at least two knots")
        dx = np.diff(self.x)
        if np.any(dx < 0):
            raise ValueError("knots must be nondecreasing")
        dup = dx == 0
        if dup[0] or dup[-1] or np.any(dup[1:] & dup[:-1]):
            raise ValueError("jumps must be isolated interior knots")
        for arr in (self.x, self.y, self.d):
            arr.setflags(write=False)

    @classmethod
    def from_segments(cls, segments):
        """Build from ``[(xs, ys), ...]``; consecutive segments share an end
        x-coordinate, which becomes a jump."""
        xs, ys, ds = [], [], []
        for i, (sx, sy) in enumerate(segments):
            sx = np.asarray(sx, dtype=float)
            sy = np.asarray(sy, dtype=float)
            if i > 0 and sx[0] != xs[-1][-1]:
                raise ValueError("segments must be contiguous")
            xs.append(sx)
            ys.append(sy)
            ds.append(pchip_slopes(sx, sy))
        return cls(np.concatenate(xs), np.concatenate(ys), np.concatenate(ds))

    @property
    def jumps(self):
        """x-locations of repeated knots."""
        i = np.flatnonzero(np.diff(self.x) == 0)
        return self.x[i]

    @property
    def domain(self):
        return float(self.x[0]), float(self.x[-1])

    def _locate(self, q, side):
        i = np.searchsorted(self.x, q, side=side) - 1
        return np.clip(i, 0, self.x.size - 2)

    def __call__(self, q, side="right"):
        q = np.asarray(q, dtype=float)
        i = self._locate(q, side)
        x0, x1 = self.x[i], self.x[i + 1]
        h = x1 - x0
        t = (q - x0) / h
        t2 = t * t
        t3 = t2 * t
        return ((2 * t3 - 3 * t2 + 1) * self.y[i] + (t3 - 2 * t2 + t) * h * self.d[i]
                + (-2 * t3 + 3 * t2) * self.y[i + 1] + (t3 - t2) * h * self.d[i + 1])

    def derivative(self, q, side="right"):
        q = np.asarray(q, dtype=float)
        i = self._locate(q, side)
        x0, x1 = self.x[i], self.x[i + 1]
        h = x1 - x0
        t = (q - x0) / h
        t2 = t * t
        return ((6 * t2 - 6 * t) * (self.y[i] - self.y[i + 1]) / h
                + (3 * t2 - 4 * t + 1) * self.d[i] + (3 * t2 - 2 * t) * self.d[i + 1])

    def combine(self, other, sign=1.0):
        """Knot-wise sum ``self + sign*other``; both tables must share knots."""
        if not np.array_equal(self.x, other.x):
            raise ValueError("tables do not share a knot grid")
        return HermiteTable(self.x, self.y + sign * other.y, self.d + sign * other.d)

    def extremes(self):
        """Exact min and max of the interpolant (cubic critical points checked)."""
        lo = float(self.y.min())
        hi = float(self.y.max())
        x0, x1 = self.x[:-1], self.x[1:]
        h = x1 - x0
        keep = h > 0
        y0, y1 = self.y[:-1][keep], self.y[1:][keep]
        d0, d1 = self.d[:-1][keep], self.d[1:][keep]
        h = h[keep]
        # p'(t)/1 = a t^2 + b t + c in local coordinate t in [0, 1]
        a = 6 * (y0 - y1) + 3 * h * (d0 + d1)
        b = -6 * (y0 - y1) - h * (4 * d0 + 2 * d1)
        c = h * d0
        roots = []
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = b * b - 4 * a * c
            sq = np.sqrt(np.where(disc >= 0, disc, np.nan))
            for r in ((-b + sq) / (2 * a), (-b - sq) / (2 * a), -c / b):
                roots.append(r)
        for r in roots:
            ok = np.isfinite(r) & (r > 0) & (r < 1)
            if not np.any(ok):
                continue
            t = r[ok]
            t2, t3 = t * t, t * t * t
            hh = h[ok]
            v = ((2 * t3 - 3 * t2 + 1) * y0[ok] + (t3 - 2 * t2 + t) * hh * d0[ok]
                 + (-2 * t3 + 3 * t2) * y1[ok] + (t3 - t2) * hh * d1[ok])
            lo = min(lo, float(v.min()))
            hi = max(hi, float(v.max()))
        return lo, hi
