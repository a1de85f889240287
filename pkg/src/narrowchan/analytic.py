"""Closed-form exit-time, wing-occupation and transport-speed evaluators.

Everything is expressed for a drift ``beta > 0`` along the channel.  Width
functions may be given as a :class:`~narrowchan.geometry.ChannelSpec` (the
main-channel width is used), a :class:`~narrowchan.hermite.HermiteTable`, a
positive number, or a vectorised callable together with its jump locations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, ParameterError, PreconditionError
from .geometry import ChannelSpec, WingSpec
from .hermite import HermiteTable
from .quadrature import gauss_legendre, integrate, panel_edges

TAIL_TOL = 1e-12


@dataclass(frozen=True)
class WidthSource:
    """A width function with the data quadrature needs."""

    f: object
    breaks: np.ndarray
    domain: tuple
    l_min: float | None = None
    l_max: float | None = None

    def __call__(self, x):
        return self.f(x)


def as_width(l, jumps=(), l_min=None, l_max=None) -> WidthSource:
    if isinstance(l, WidthSource):
        return l
    if isinstance(l, ChannelSpec):
        return WidthSource(l.l0, l.breakpoints, l.x_range, l.l_min, l.l_max)
    if isinstance(l, HermiteTable):
        lo, hi = l.extremes()
        return WidthSource(l, np.unique(l.x), l.domain,
                           lo if l_min is None else l_min, hi if l_max is None else l_max)
    if isinstance(l, WingSpec):
        w = l
        cap = w.tip - w.sign * w.tip_radius
        return WidthSource(w.width, np.array([cap]), w.span, 0.0, w.level)
    if callable(l):
        return WidthSource(l, np.asarray(jumps, float), (-math.inf, math.inf), l_min, l_max)
    c = float(l)
    if not c > 0:
        raise ParameterError("constant width must be positive")
    return WidthSource(lambda x, c=c: np.full(np.shape(x), c), np.asarray(jumps, float),
                       (-math.inf, math.inf), c, c)


def _bound(src: WidthSource, which: str, lo: float, hi: float) -> float:
    val = src.l_max if which == "max" else src.l_min
    if val is not None:
        return float(val)
    xs = np.linspace(lo, hi, 4097)
    v = src(xs)
    return float(v.max() if which == "max" else v.min())


def _check_beta(beta):
    if not beta > 0:
        raise DivergenceError(f"beta must be positive (got {beta}); exit-time integrals diverge")


# --------------------------------------------------------------------- fixed-channel exit time
@dataclass(frozen=True)
class ExitTimeResult:
    value: float
    main_term: float
    tail_term: float
    tail_bound: float
    error_estimate: float
    left_tail_T: float
    note: str = ""


def _nested_main_term(src, beta, a, max_width, order=8):
    """2 * int_0^a (1/l(y)) int_0^y l(t) exp(-2 beta (y-t)) dt dy."""
    edges = panel_edges(0.0, a, src.breaks, max_width)
    lo, hi = edges[:-1], edges[1:]
    h = hi - lo
    xi, wi = gauss_legendre(order)
    tn = 0.5 * (xi + 1.0)
    wn = 0.5 * wi
    c = 2.0 * beta
    # increments of g over whole panels, g(y) = int_0^y l(t) e^{-c(y-t)} dt
    t = lo[:, None] + h[:, None] * tn[None, :]
    lt = src(t.ravel()).reshape(t.shape)
    inc = h * ((lt * np.exp(-c * (hi[:, None] - t))) @ wn)
    decay = np.exp(-c * h)
    g_left = np.empty_like(lo)
    acc = 0.0
    for k in range(lo.size):
        g_left[k] = acc
        acc = acc * decay[k] + inc[k]
    # g at outer nodes: carry-over plus partial panel integral
    y = t  # outer nodes coincide with the panel nodes
    s = lo[:, None, None] + (y - lo[:, None])[:, :, None] * tn[None, None, :]
    ls = src(s.ravel()).reshape(s.shape)
    part = (y - lo[:, None]) * ((ls * np.exp(-c * (y[:, :, None] - s))) @ wn)
    g = g_left[:, None] * np.exp(-c * (y - lo[:, None])) + part
    return 2.0 * float(np.sum(h * ((g / lt) @ wn)))


def exit_time_quadrature(l, beta, a, left_tail_T=None, *, jumps=(), l_max=None,
                         tol=1e-10) -> ExitTimeResult:
    """Mean exit time from ``(-inf, a]`` of the main-line diffusion started at 0.

    Evaluates
    ``2 int_0^a dy/l(y) int_0^y l(t) e^{-2b(y-t)} dt
    + 2 int_{-T}^0 l(t) e^{2bt} dt * int_0^a e^{-2by}/l(y) dy``
    with panels split at every jump of ``l``.  ``T`` defaults to the smaller
    of the left edge of the width's domain and the point where the neglected
    tail drops below 1e-12; the neglected part is bounded by
    ``l_max e^{-2bT} / b * int_0^a e^{-2by}/l(y) dy``.
    """
    _check_beta(beta)
    if a <= 0:
        return ExitTimeResult(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, "a <= 0: already at the exit level")
    src = as_width(l, jumps, l_max=l_max)
    if src.domain[1] < a:
        raise PreconditionError(f"width known only up to x={src.domain[1]} < a={a}")
    lmax = _bound(src, "max", max(src.domain[0], -50.0), a)
    t_auto = math.log(max(lmax, 1e-300) / (beta * TAIL_TOL)) / (2.0 * beta)
    T = t_auto if left_tail_T is None else float(left_tail_T)
    T = min(T, -src.domain[0])
    if T < 0:
        raise PreconditionError("width domain must contain x = 0")

    width = 1.0 / 8.0
    prev = _nested_main_term(src, beta, a, width)
    err = math.inf
    for _ in range(8):
        width /= 2.0
        cur = _nested_main_term(src, beta, a, width)
        err = abs(cur - prev)
        prev = cur
        if err <= tol * max(1.0, abs(cur)):
            break
    main = prev

    i_a, e1 = integrate(lambda y: np.exp(-2 * beta * y) / src(y), 0.0, a, src.breaks, tol=tol)
    left, e2 = integrate(lambda t: src(t) * np.exp(2 * beta * t), -T, 0.0, src.breaks, tol=tol,
                         max_width=1.0)
    tail = 2.0 * left * i_a
    bound = lmax * math.exp(-2.0 * beta * T) / beta * i_a
    return ExitTimeResult(main + tail, main, tail, bound, err + 2 * (e1 * left + e2 * i_a), T)


# --------------------------------------------------------------------- scale and speed
class ScaleSpeed:
    """Scale ``u(x) = int_0^x e^{-2by}/l dy`` and speed ``v(x) = 2 int_0^x l e^{2by} dy``
    of the main-line diffusion, plus the drift-free pair
    ``q(x) = int_0^x dy/l`` and ``r(x) = 2 int_0^x l dy``."""

    def __init__(self, l, beta, jumps=()):
        self.src = as_width(l, jumps)
        self.beta = float(beta)

    def _cumulative(self, g, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        lo = min(0.0, float(x.min()))
        hi = max(0.0, float(x.max()))
        if hi == lo:
            return np.zeros_like(x)
        edges = panel_edges(lo, hi, np.concatenate([self.src.breaks, x, [0.0]]), 1.0 / 16.0)
        xi, wi = gauss_legendre(8)
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        nodes = 0.5 * (a + b)[:, None] + half[:, None] * xi
        vals = g(nodes.ravel()).reshape(nodes.shape)
        cum = np.concatenate([[0.0], np.cumsum(half * (vals @ wi))])
        idx = np.searchsorted(edges, x)
        zero = np.searchsorted(edges, 0.0)
        return cum[idx] - cum[zero]

    def du(self, x):
        return np.exp(-2 * self.beta * np.asarray(x, float)) / self.src(x)

    def dv(self, x):
        return 2.0 * self.src(x) * np.exp(2 * self.beta * np.asarray(x, float))

    def u(self, x):
        return self._cumulative(self.du, x)

    def v(self, x):
        return self._cumulative(self.dv, x)

    def q(self, x):
        return self._cumulative(lambda y: 1.0 / self.src(y), x)

    def r(self, x):
        return self._cumulative(lambda y: 2.0 * self.src(y), x)


# --------------------------------------------------------------------- wing terms
@dataclass(frozen=True)
class WingTimeTerms:
    """``W = sign(r) int_q^{q+r} l_wing(t) e^{2b(t-q)} dt``,
    ``C = int_lo^a e^{-2b(y-q)}/l_0(y) dy`` with ``lo = max(q, 0)``, and the
    expected time ``M = 2 W C`` spent in the pocket before exit."""

    W: float
    C: float
    M: float
    q: float
    r: float
    a: float
    truncation_bound: float = 0.0


def wing_integral(l_wing, q, r, beta, tol=1e-11) -> float:
    """``sign(r) int_q^{q+r} l_wing(t) exp(2 beta (t - q)) dt`` (nonnegative)."""
    if r == 0:
        return 0.0
    src = as_width(l_wing)
    lo, hi = min(q, q + r), max(q, q + r)
    val, _ = integrate(lambda t: src(t) * np.exp(2 * beta * (t - q)), lo, hi, src.breaks,
                       tol=tol, max_width=1.0 / 8.0)
    return float(val)


def downstream_integral(l0, lo, a, beta, q=None, tol=1e-11):
    """``int_lo^a exp(-2 beta (y - q)) / l0(y) dy`` with ``q`` defaulting to ``lo``.

    ``a = inf`` is truncated where the remainder is below 1e-12 (relative to
    the discount at ``lo``); returns ``(value, truncation_bound)``.
    """
    src = as_width(l0)
    q = lo if q is None else q
    if a <= lo:
        return 0.0, 0.0
    bound = 0.0
    if math.isinf(a):
        lmin = _bound(src, "min", lo, min(src.domain[1], lo + 50.0))
        T = math.log(1.0 / (2 * beta * lmin * TAIL_TOL)) / (2 * beta)
        end = lo + T
        if end > src.domain[1]:
            end = src.domain[1]
        bound = math.exp(-2 * beta * (end - q)) / (2 * beta * lmin)
        a = end
    if a > src.domain[1]:
        raise PreconditionError(f"width known only up to x={src.domain[1]} < {a}")
    val, _ = integrate(lambda y: np.exp(-2 * beta * (y - q)) / src(y), lo, a, src.breaks, tol=tol,
                       max_width=1.0)
    return float(val), bound


def wing_time_terms(l_wing, r, q, l0, beta, a) -> WingTimeTerms:
    _check_beta(beta)
    if q > a:
        raise PreconditionError(f"wing attached at q={q} beyond the exit level a={a}")
    if r == 0:
        return WingTimeTerms(0.0, 0.0, 0.0, q, r, a)
    W = wing_integral(l_wing, q, r, beta)
    C, bound = downstream_integral(l0, max(q, 0.0), a, beta, q=q)
    return WingTimeTerms(W, C, 2.0 * W * C, q, r, a, 2.0 * W * bound)


def wing_time_formula(l_wing, r, q, l0, beta, a) -> float:
    """Expected time spent in a pocket ``[q, q+r]`` before the main-line
    coordinate, started at 0, first reaches ``a``.

    ``q > 0``: ``2 W int_q^a e^{-2b(y-q)}/l_0``;  ``q <= 0``:
    ``2 W int_0^a e^{-2b(y-q)}/l_0``.  ``a`` may be ``inf``.
    """
    return wing_time_terms(l_wing, r, q, l0, beta, a).M


# --------------------------------------------------------------------- effective speed
@dataclass(frozen=True)
class SpeedEstimate:
    """Effective inverse transport speed and its two parts."""

    value: float
    stderr: float
    first_term: float
    first_stderr: float
    tail_bound: float
    wing_part: float
    wing_stderr: float
    beta: float
    provenance: dict = field(default_factory=dict)

    @property
    def speed(self) -> float:
        return 1.0 / self.value


def _kernel_integral(t, k, c):
    """int_0^inf k(t) e^{-ct} dt for piecewise-linear k on t, constant after
    the last point."""
    t0, t1 = t[:-1], t[1:]
    k0, k1 = k[:-1], k[1:]
    h = t1 - t0
    e0, e1 = np.exp(-c * t0), np.exp(-c * t1)
    E = (e0 - e1) / c
    slope = np.where(h > 0, (k1 - k0) / np.where(h > 0, h, 1.0), 0.0)
    body = np.sum(k0 * E + slope * (E / c - h * e1 / c))
    head = k[0] * (1.0 - math.exp(-c * t[0])) / c  # t_grid may start after 0
    return head + body + k[-1] * math.exp(-c * t[-1]) / c


def inverse_speed(K, E_n, wing_term, beta, *, E_n_stderr=0.0, wing_term_stderr=0.0,
                  provenance=None) -> SpeedEstimate:
    """``2 int_0^inf K(t) e^{-2bt} dt + 2 E_n wing_term``.

    ``K`` is a :class:`~narrowchan.environment.KEstimate`; it is integrated
    exactly as a piecewise-linear function and held constant beyond its last
    point.  The error of that extrapolation is bounded with the estimate's
    ``k_bound`` (no bound, no answer).
    """
    _check_beta(beta)
    kb = getattr(K, "k_bound", None)
    if kb is None or not np.isfinite(kb):
        raise PreconditionError("KEstimate carries no tail bound; truncation error unbounded")
    t = np.asarray(K.t_grid, float)
    k = np.asarray(K.K_values, float)
    se = np.asarray(K.std_errors, float)
    c = 2.0 * beta
    first = 2.0 * _kernel_integral(t, k, c)
    # linear functional: weights from unit vectors, errors combined as if fully correlated
    w = np.array([2.0 * _kernel_integral(t, np.eye(t.size)[i], c) for i in range(t.size)])
    first_se = float(np.sum(np.abs(w) * se))
    spread = max(kb - k[-1], k[-1] - 1.0 / kb, 0.0)
    tail_bound = 2.0 * spread * math.exp(-c * t[-1]) / c
    wing_part = 2.0 * E_n * wing_term
    wing_se = 2.0 * math.hypot(wing_term * E_n_stderr, E_n * wing_term_stderr)
    prov = {"K_length": getattr(K, "sample_length", None), "t_max": float(t[-1]),
            "E_n": E_n, "E_n_stderr": E_n_stderr, "wing_term": wing_term,
            "wing_term_stderr": wing_term_stderr}
    prov.update(provenance or {})
    return SpeedEstimate(first + wing_part, math.hypot(first_se, wing_se), first, first_se,
                         tail_bound, wing_part, wing_se, float(beta), prov)
