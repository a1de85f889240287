"""Random channels built from i.i.d. blocks, and the environment statistics
that enter the effective transport speed."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .analytic import downstream_integral, wing_integral
from .errors import DivergenceError, InsufficientSampleError, ParameterError
from .geometry import DEFAULT_SPACING, ChannelSpec, WingSpec
from .hermite import HermiteTable
from .quadrature import gauss_legendre, panel_edges

_MASK64 = (1 << 64) - 1
_WIDTH_STREAM = 0
_PHASE_STREAM = 1
_BOOT_STREAM = 2


@dataclass(frozen=True)
class Dist:
    """Bounded scalar law: ``constant`` (value), ``uniform`` (low, high) or
    ``choice`` (values, probs)."""

    kind: str = "constant"
    value: float = 1.0
    low: float = 0.0
    high: float = 1.0
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "uniform", "choice"):
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "uniform" and not self.low <= self.high:
            raise ParameterError("uniform law needs low <= high")
        if self.kind == "choice":
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            probs = self.probs or (1.0 / len(self.values),) * len(self.values)
            object.__setattr__(self, "probs", tuple(float(p) for p in probs))
            if not self.values or len(self.values) != len(self.probs):
                raise ParameterError("choice law needs matching values and probs")
            if abs(sum(self.probs) - 1.0) > 1e-12 or min(self.probs) < 0:
                raise ParameterError("choice probabilities must be nonnegative and sum to 1")

    @property
    def support(self):
        if self.kind == "constant":
            return (self.value, self.value)
        if self.kind == "uniform":
            return (self.low, self.high)
        return (min(self.values), max(self.values))

    def sample(self, rng):
        """One draw; always consumes exactly one uniform so streams stay aligned."""
        u = rng.random()
        if self.kind == "constant":
            return self.value
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * u
        cum = np.cumsum(self.probs)
        return self.values[min(int(np.searchsorted(cum, u, side="right")), len(self.values) - 1)]

    def mean(self):
        if self.kind == "constant":
            return self.value
        if self.kind == "uniform":
            return 0.5 * (self.low + self.high)
        return float(np.dot(self.values, self.probs))

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind == "uniform":
            d.update(low=self.low, high=self.high)
        else:
            d.update(values=list(self.values), probs=list(self.probs))
        return d

    @classmethod
    def from_dict(cls, d):
        if isinstance(d, (int, float)):
            return cls("constant", value=float(d))
        d = dict(d)
        if "values" in d:
            d["values"] = tuple(d["values"])
        if "probs" in d:
            d["probs"] = tuple(d["probs"])
        return cls(**d)


@dataclass(frozen=True)
class WingLaw:
    """Law of one pocket: extent ``|r|``, sign of ``r``, side and width level."""

    extent: Dist = Dist("constant", value=0.5)
    p_positive: float = 1.0
    p_above: float = 1.0
    level: Dist = Dist("constant", value=0.5)
    tip_radius: float | None = None
    wall: float = 0.05

    def to_dict(self):
        return {"extent": self.extent.to_dict(), "p_positive": self.p_positive,
                "p_above": self.p_above, "level": self.level.to_dict(),
                "tip_radius": self.tip_radius, "wall": self.wall}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("extent", "level"):
            if k in d:
                d[k] = Dist.from_dict(d[k])
        return cls(**d)


@dataclass(frozen=True)
class EnvironmentParams:
    """Block construction of a random channel.

    Each block of length ``block_length`` gets one width value (a knot value
    for ``smoothing="pchip"``, a constant for ``"piecewise-constant"``) and,
    with probability ``wing_prob``, one pocket attached at the block start
    (extending right for ``r > 0``, left for ``r < 0``).  Blocks are i.i.d.,
    each drawn from its own counter-based stream keyed by ``(seed, block)``;
    a uniform phase in ``[0, block_length)`` makes the law shift-invariant.
    """

    block_length: float = 1.0
    width_law: Dist = Dist("constant", value=1.0)
    smoothing: str = "pchip"
    wing_prob: float = 0.0
    wing_law: WingLaw = WingLaw()
    l_min: float = 0.5
    l_max: float = 2.0
    n0: int = 1
    a1: float = 1.0
    seed: int = 0
    phase_shift: bool = True
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        self.validate()

    @property
    def dependence_range(self) -> float:
        """Distance beyond which widths are exactly independent."""
        return (4.0 if self.smoothing == "pchip" else 2.0) * self.block_length

    def validate(self):
        L = self.block_length
        if not L > 0:
            raise ParameterError("block_length must be positive")
        if self.smoothing not in ("pchip", "piecewise-constant"):
            raise ParameterError(f"unknown smoothing {self.smoothing!r}")
        if not (0 < self.l_min < self.l_max):
            raise ParameterError("need 0 < l_min < l_max")
        lo, hi = self.width_law.support
        if lo < self.l_min or hi > self.l_max:
            raise ParameterError("width law support must lie in [l_min, l_max]")
        if not 0.0 <= self.wing_prob <= 1.0:
            raise ParameterError("wing_prob must lie in [0, 1]")
        if not (isinstance(self.n0, int) and self.n0 >= 1):
            raise ParameterError("n0 must be an integer >= 1")
        if self.wing_prob > 0:
            if self.n0 < math.ceil(1.0 / L - 1e-12):
                raise ParameterError(f"n0={self.n0} below the {math.ceil(1 / L)} wings per "
                                     "unit length the block layout allows")
            wl = self.wing_law
            emin, emax = wl.extent.support
            mixed = 0.0 < wl.p_positive < 1.0
            limit = 0.5 * L if mixed else L
            if emin <= 0 or emax > limit + 1e-12:
                raise ParameterError(f"wing extents must lie in (0, {limit}] for this layout")
            if emax > self.a1 or wl.level.support[1] > self.a1:
                raise ParameterError("wing extent and level must not exceed A1")
            if wl.level.support[0] <= 0:
                raise ParameterError("wing level must be positive")
            if not 0 < wl.wall < self.l_min:
                raise ParameterError("wall thickness must lie in (0, l_min)")
            if wl.tip_radius is not None and not 0 <= wl.tip_radius <= emin:
                raise ParameterError("tip_radius must lie in [0, min extent]")

    def with_seed(self, seed: int) -> "EnvironmentParams":
        return replace(self, seed=int(seed))

    def to_dict(self):
        d = asdict(self)
        d["width_law"] = self.width_law.to_dict()
        d["wing_law"] = self.wing_law.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("dependence_range", None)
        if "width_law" in d:
            d["width_law"] = Dist.from_dict(d["width_law"])
        if "wing_law" in d:
            d["wing_law"] = WingLaw.from_dict(d["wing_law"])
        return cls(**d)


def derive_seed(seed: int, *path: int) -> int:
    """Child seed from a parent and an index path (stable across runs)."""
    ss = np.random.SeedSequence([int(seed) & _MASK64, *[int(p) & _MASK64 for p in path]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def block_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Counter-based generator for one block: Philox keyed by (seed, stream)
    and started at a counter determined by the block index."""
    key = np.array([int(seed) & _MASK64, int(stream) & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, int(index) & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def phase(params: EnvironmentParams) -> float:
    if not params.phase_shift:
        return 0.0
    return params.block_length * block_rng(params.seed, _PHASE_STREAM, 0).random()


@dataclass
class Blocks:
    index: np.ndarray
    start: np.ndarray
    width: np.ndarray
    has_wing: np.ndarray
    extent: np.ndarray
    positive: np.ndarray
    above: np.ndarray
    level: np.ndarray


def sample_blocks(params: EnvironmentParams, i0: int, i1: int) -> Blocks:
    """Draw blocks ``i0 .. i1`` inclusive."""
    n = i1 - i0 + 1
    out = Blocks(np.arange(i0, i1 + 1), np.empty(n), np.empty(n), np.zeros(n, bool),
                 np.zeros(n), np.zeros(n, bool), np.zeros(n, bool), np.zeros(n))
    ph = phase(params)
    wl = params.wing_law
    for k, i in enumerate(range(i0, i1 + 1)):
        rng = block_rng(params.seed, _WIDTH_STREAM, i)
        out.width[k] = params.width_law.sample(rng)
        out.has_wing[k] = rng.random() < params.wing_prob
        out.extent[k] = wl.extent.sample(rng)
        out.positive[k] = rng.random() < wl.p_positive
        out.above[k] = rng.random() < wl.p_above
        out.level[k] = wl.level.sample(rng)
    out.start[:] = ph + params.block_length * out.index
    return out


def _block_range(params, x0, x1, pad):
    ph = phase(params)
    L = params.block_length
    return int(math.floor((x0 - ph) / L)) - pad, int(math.ceil((x1 - ph) / L)) + pad


def width_function(params: EnvironmentParams, blocks: Blocks):
    """Main-channel width as a callable plus its jump list."""
    if params.smoothing == "piecewise-constant":
        starts, w = blocks.start, blocks.width

        def f(x):
            i = np.clip(np.searchsorted(starts, x, side="right") - 1, 0, starts.size - 1)
            return w[i]

        change = np.flatnonzero(np.diff(w) != 0) + 1
        return f, starts[change]
    if blocks.width.min() == blocks.width.max():
        c = float(blocks.width[0])
        return (lambda x: np.full(np.shape(x), c)), np.empty(0)
    table = HermiteTable.from_segments([(blocks.start, blocks.width)])
    return table, np.empty(0)


def sample_environment(params: EnvironmentParams, x_range) -> ChannelSpec:
    """One channel on ``x_range``, a deterministic function of ``params``."""
    x0, x1 = map(float, x_range)
    if not (np.isfinite(x0) and np.isfinite(x1) and x0 < x1):
        raise ParameterError("x_range must be a finite nonempty interval")
    i0, i1 = _block_range(params, x0, x1, pad=3)
    blocks = sample_blocks(params, i0, i1)
    wfun, jumps = width_function(params, blocks)
    wings = []
    wl = params.wing_law
    prev_hi = -np.inf
    for k in np.flatnonzero(blocks.has_wing):
        q = float(blocks.start[k])
        r = float(blocks.extent[k]) * (1.0 if blocks.positive[k] else -1.0)
        lo, hi = min(q, q + r), max(q, q + r)
        overlap = prev_hi - lo
        if 0.0 < overlap < 1e-9 * max(1.0, abs(lo)):
            # pockets filling whole blocks abut; rounding must not make them overlap
            q, lo, hi = q + overlap, lo + overlap, hi + overlap
        prev_hi = hi
        if not (x0 < q < x1 and lo >= x0 and hi <= x1):
            continue
        wings.append(WingSpec(q=q, r=r, side="above" if blocks.above[k] else "below",
                              level=float(blocks.level[k]), tip_radius=wl.tip_radius,
                              wall=wl.wall))
    return ChannelSpec.with_wings(wfun, (x0, x1), wings, jumps=jumps, spacing=params.spacing,
                                  l_min=params.l_min, l_max=params.l_max, a1=params.a1)


def widths_at(params: EnvironmentParams, x) -> np.ndarray:
    """Main-channel width at the points ``x`` without building a full channel."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    i0, i1 = _block_range(params, float(x.min()), float(x.max()), pad=3)
    wfun, _ = width_function(params, sample_blocks(params, i0, i1))
    return np.asarray(wfun(x), dtype=float)


def wing_counts(spec: ChannelSpec, window=1.0):
    """Largest number of attachments in any half-open window of the given length."""
    q = np.sort([w.q for w in spec.wings])
    if q.size == 0:
        return 0
    # spacing of exactly one window must not count twice under rounding
    j = np.searchsorted(q, q + window * (1.0 - 1e-9), side="left")
    return int((j - np.arange(q.size)).max())


# --------------------------------------------------------------------- K kernel
@dataclass(frozen=True)
class KEstimate:
    """``K(t) = E[l0(s) / l0(s+t)]`` on a grid with standard errors."""

    t_grid: np.ndarray
    K_values: np.ndarray
    std_errors: np.ndarray
    sample_length: float
    ensemble_size: int = 1
    k_bound: float | None = None

    def rows(self):
        return [{"t": float(t), "K": float(k), "stderr": float(s)}
                for t, k, s in zip(self.t_grid, self.K_values, self.std_errors)]


def _ratio_integrals(l0, jumps, S, t, n_batches, panel=1.0 / 16.0, order=4):
    """Per-batch integrals of l0(s)/l0(s+t) over [0, S]."""
    br = np.concatenate([jumps, jumps - t])
    edges = panel_edges(0.0, S, br, panel)
    xi, wi = gauss_legendre(order)
    a, b = edges[:-1], edges[1:]
    half = 0.5 * (b - a)
    s = 0.5 * (a + b)[:, None] + half[:, None] * xi
    vals = l0(s.ravel()).reshape(s.shape) / l0((s + t).ravel()).reshape(s.shape)
    per_panel = half * (vals @ wi)
    batch = np.minimum((0.5 * (a + b) / S * n_batches).astype(int), n_batches - 1)
    return np.bincount(batch, weights=per_panel, minlength=n_batches)


def estimate_K(params: EnvironmentParams, t_grid, S: float, *, n_batches: int = 100,
               n_boot: int = 400, ensemble: int = 1) -> KEstimate:
    """Spatial average ``(1/S) int_0^S l0(s)/l0(s+t) ds`` on one long sample.

    Standard errors come from a bootstrap over ``n_batches`` contiguous
    batches (each much longer than the dependence range).  With
    ``ensemble > 1`` the estimate is averaged over derived seeds and the
    spread across members is reported instead.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0 or np.any(t < 0) or np.any(np.diff(t) <= 0):
        raise ParameterError("t_grid must be increasing and nonnegative")
    if S <= t[-1]:
        raise InsufficientSampleError(f"sample length {S} must exceed max t = {t[-1]}")
    kb = params.l_max / params.l_min
    if ensemble > 1:
        members = [estimate_K(params.with_seed(derive_seed(params.seed, 7, m)), t, S,
                              n_batches=n_batches, n_boot=n_boot) for m in range(ensemble)]
        vals = np.array([m.K_values for m in members])
        se = vals.std(axis=0, ddof=1) / math.sqrt(ensemble)
        return KEstimate(t, vals.mean(axis=0), se, S, ensemble, kb)
    x1 = S + t[-1] + params.block_length
    i0, i1 = _block_range(params, 0.0, x1, pad=3)
    wfun, jumps = width_function(params, sample_blocks(params, i0, i1))
    K = np.empty(t.size)
    se = np.empty(t.size)
    rng = block_rng(params.seed, _BOOT_STREAM, 0)
    picks = rng.integers(0, n_batches, size=(n_boot, n_batches))
    for i, ti in enumerate(t):
        if ti == 0.0:
            K[i], se[i] = 1.0, 0.0
            continue
        batches = _ratio_integrals(wfun, jumps, S, ti, n_batches)
        K[i] = batches.sum() / S
        boot = batches[picks].sum(axis=1) / S
        se[i] = boot.std(ddof=1)
    return KEstimate(t, K, se, S, 1, kb)


# --------------------------------------------------------------------- wing moments
@dataclass(frozen=True)
class WingMoments:
    E_n: float
    E_n_stderr: float
    wing_term: float
    wing_term_stderr: float
    truncation_bound: float
    T_max: float
    n_samples: int
    n_wings: int
    beta: float


def wing_moment_estimates(params: EnvironmentParams, beta: float, n_samples: int,
                          window: float = 1.0) -> WingMoments:
    """Monte Carlo estimates of the mean number of pockets per unit length and
    of ``E[W * C]`` taken jointly over pocket and downstream channel, where
    ``W = sign(r) int_q^{q+r} l_wing(t) e^{2b(t-q)} dt`` and
    ``C = int_q^{q+T} e^{-2b(y-q)}/l0(y) dy``; ``T`` is chosen so that
    ``e^{-2bT}/l_min < 1e-10``.

    Each sample is an independent channel (derived seed); pockets attached in
    ``[0, window)`` are counted.
    """
    if not beta > 0:
        raise DivergenceError("beta must be positive")
    if n_samples < 1:
        raise ParameterError("n_samples must be >= 1")
    T = math.log(1.0 / (1e-10 * params.l_min)) / (2.0 * beta)
    counts = np.zeros(n_samples)
    sums = np.zeros(n_samples)
    ws = []
    for s in range(n_samples):
        p = params.with_seed(derive_seed(params.seed, 11, s))
        if p.wing_prob == 0.0:
            continue
        lo = -params.a1 - 2 * params.block_length
        hi = window + T + params.a1 + 2 * params.block_length
        spec = sample_environment(p, (lo, hi))
        for w in spec.wings:
            if 0.0 <= w.q < window:
                W = wing_integral(w, w.q, w.r, beta)
                C, _ = downstream_integral(spec, w.q, w.q + T, beta)
                counts[s] += 1
                sums[s] += W * C
                ws.append(W)
    n_tot = counts.sum()
    E_n = counts.mean() / window
    E_n_se = counts.std(ddof=1) / math.sqrt(n_samples) / window if n_samples > 1 else 0.0
    if n_tot == 0:
        return WingMoments(E_n, E_n_se, 0.0, 0.0, 0.0, T, n_samples, 0, beta)
    term = sums.sum() / n_tot
    # ratio estimator: linearised residuals per sample
    resid = sums - term * counts
    term_se = (resid.std(ddof=1) / math.sqrt(n_samples) / counts.mean()
               if n_samples > 1 else 0.0)
    trunc = float(np.mean(ws)) * math.exp(-2 * beta * T) / (2 * beta * params.l_min)
    return WingMoments(E_n, E_n_se, term, term_se, trunc, T, n_samples, int(n_tot), beta)
