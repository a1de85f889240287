"""Configured experiments and their CSV/JSON artefacts.

A config is one JSON object.  ``kind`` selects the experiment; every other
field falls back to the per-kind defaults in :data:`DEFAULTS`, and the fully
resolved config is echoed into ``manifest.json``.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analytic import exit_time_quadrature, inverse_speed
from .bvp import solve_exit_bvp
from .environment import (EnvironmentParams, derive_seed, estimate_K, sample_environment,
                          wing_moment_estimates)
from .errors import OutputError, ParameterError
from .geometry import ChannelSpec, WingSpec, validate_assumptions
from .graph import GraphPoint, build_graph, locate
from .graph_mc import MeanEstimate, SimParams, simulate_exit
from .reflected import SdeParams, VelocityField, simulate_exit_2d

log = logging.getLogger(__name__)

SEED_ENV_VAR = "NARROWCHAN_SEED"

KINDS = ("validate-geometry", "estimate-K", "graph-mc", "sde-mc", "eps-sweep", "speed",
         "oracle-compare")

_CHANNEL = {"builder": "with_wings", "width": 1.0, "x_range": [-20.0, 10.0],
            "wings": [{"q": 0.0, "r": 1.0}]}

DEFAULTS = {
    "validate-geometry": {"channel": _CHANNEL},
    "estimate-K": {"t_max": 6.0, "t_step": 0.1, "S": 1e4, "n_batches": 100, "n_boot": 400},
    "graph-mc": {"channel": _CHANNEL, "beta": 1.0, "a": 3.0, "start": [-1.0, 0.0],
                 "dt": 1e-4, "n_paths": 10000, "vertex_law": "exact", "reference": True,
                 "bvp_h": 1e-3},
    "sde-mc": {"channel": _CHANNEL, "velocity": {"beta": 1.0}, "a": 3.0,
               "start": [-1.0, 0.0], "epsilon": 0.1, "dt": None, "n_paths": 1000,
               "boundary": SdeParams.boundary, "record_paths": 0, "record_every": 100},
    "eps-sweep": {"channel": _CHANNEL, "velocity": {"beta": 1.0}, "a": 3.0,
                  "start": [-1.0, 0.0], "epsilons": [0.4, 0.2, 0.1], "n_paths": 1000,
                  "boundary": SdeParams.boundary, "common_noise": False, "bvp_h": 1e-3},
    "speed": {"beta": 1.0, "t_max": 6.0, "t_step": 0.1, "S": 1e4, "n_batches": 100,
              "n_boot": 400, "n_wing_samples": 2000, "long_run": None},
    "oracle-compare": {"n_shapes": 20, "beta": 1.0, "a": 5.0, "bvp_h": 1e-3, "x_left": -16.0},
}

LONG_RUN_DEFAULTS = {"a": 500.0, "dt": 1e-3, "n_paths": 20, "x_left": -20.0}


@dataclass
class ExperimentConfig:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict)
    environment: dict | None = None

    @classmethod
    def from_dict(cls, d: dict, seed_override: int | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ParameterError("config must be a JSON object")
        d = dict(d)
        kind = d.pop("kind", None)
        if kind not in KINDS:
            raise ParameterError(f"unknown experiment kind {kind!r}; expected one of {KINDS}")
        seed = d.pop("seed", 0)
        if seed_override is not None:
            seed = seed_override
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            raise ParameterError("seed must be a nonnegative integer")
        env = d.pop("environment", None)
        d.pop("out", None)
        params = dict(DEFAULTS[kind])
        unknown = set(d) - set(params) - {"channel", "channel_file", "window"}
        if unknown:
            raise ParameterError(f"unknown config fields for {kind}: {sorted(unknown)}")
        params.update(d)
        if kind == "speed" and params.get("long_run") is not None:
            params["long_run"] = {**LONG_RUN_DEFAULTS, **params["long_run"]}
        if kind in ("estimate-K", "speed") and env is None:
            raise ParameterError(f"{kind} needs an 'environment' block")
        cfg = cls(kind, int(seed), params, env)
        if env is not None:
            cfg.environment_params()  # validates
        return cfg

    def environment_params(self) -> EnvironmentParams:
        env = dict(self.environment)
        env.setdefault("seed", self.seed)
        return EnvironmentParams.from_dict(env)

    def resolved(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, **self.params}
        if self.environment is not None:
            out["environment"] = self.environment_params().to_dict()
        return out


# --------------------------------------------------------------------- channels
def channel_from_config(cfg: ExperimentConfig) -> ChannelSpec:
    p = cfg.params
    if p.get("channel_file"):
        return ChannelSpec.from_json(Path(p["channel_file"]).read_text())
    if cfg.environment is not None and "channel" not in cfg.params:
        window = p.get("window") or [-20.0, 10.0]
        return sample_environment(cfg.environment_params(), tuple(window))
    return build_channel(p.get("channel", _CHANNEL))


def build_channel(d: dict) -> ChannelSpec:
    """Channel from a config block: a serialised channel or a builder spec."""
    if "format" in d:
        return ChannelSpec.from_dict(d)
    builder = d.get("builder", "with_wings")
    x_range = tuple(d.get("x_range", (-20.0, 10.0)))
    if builder == "constant":
        return ChannelSpec.constant(float(d.get("width", 1.0)), x_range)
    if builder == "with_wings":
        wings = [WingSpec(**w) for w in d.get("wings", [])]
        return ChannelSpec.with_wings(float(d.get("width", 1.0)), x_range, wings,
                                      jumps=d.get("jumps", ()))
    raise ParameterError(f"unknown channel builder {builder!r}")


def random_smooth_shape(seed: int, x_range=(-16.0, 6.0), n_modes: int = 4) -> ChannelSpec:
    """Jump-free channel with width ``1 + sum c_k sin(w_k x + p_k)`` kept in
    ``[0.5, 1.5]``; the centre line wiggles independently."""
    rng = np.random.default_rng(derive_seed(seed, 3))
    amp = rng.uniform(0.0, 1.0, n_modes)
    amp *= 0.45 / amp.sum()
    freq = rng.uniform(0.3, 3.0, n_modes)
    ph = rng.uniform(0.0, 2 * math.pi, n_modes)
    camp, cfreq = rng.uniform(0.0, 0.3), rng.uniform(0.2, 2.0)

    def width(x):
        x = np.asarray(x, float)[..., None]
        return 1.0 + np.sum(amp * np.sin(freq * x + ph), axis=-1)

    def centre(x):
        return camp * np.sin(cfreq * np.asarray(x, float))

    return ChannelSpec.from_functions(lambda x: centre(x) + 0.5 * width(x),
                                      lambda x: centre(x) - 0.5 * width(x),
                                      x_range, l_min=0.5, l_max=1.5)


# --------------------------------------------------------------------- runners
def _t_grid(p):
    n = int(round(p["t_max"] / p["t_step"]))
    return np.linspace(0.0, n * p["t_step"], n + 1)


def _mean_dict(prefix, m: MeanEstimate):
    return {f"{prefix}mean": m.mean, f"{prefix}stderr": m.stderr,
            f"{prefix}ci": [m.ci_low, m.ci_high], f"{prefix}n": m.n}


def run_validate(cfg):
    spec = channel_from_config(cfg)
    rep = validate_assumptions(spec)
    records = [{"check": c.name, "passed": bool(c.passed),
                "x": "" if c.x is None else float(c.x), "detail": c.detail}
               for c in rep.checks]
    return records, {"ok": rep.ok, "n_checks": len(rep.checks),
                     "n_failures": len(rep.failures()), "n_wings": len(spec.wings)}


def run_estimate_K(cfg):
    p = cfg.params
    env = cfg.environment_params()
    K = estimate_K(env, _t_grid(p), float(p["S"]), n_batches=int(p["n_batches"]),
                   n_boot=int(p["n_boot"]))
    return K.rows(), {"sample_length": K.sample_length, "k_bound": K.k_bound,
                      "max_stderr": float(K.std_errors.max()), "env_seed": env.seed}


def _start_point(graph, start):
    return locate(graph, tuple(map(float, start)))


def run_graph_mc(cfg):
    p = cfg.params
    spec = channel_from_config(cfg)
    graph = build_graph(spec)
    start = _start_point(graph, p["start"])
    sim = SimParams(dt=float(p["dt"]), beta=float(p["beta"]), seed=cfg.seed,
                    n_paths=int(p["n_paths"]), vertex_law=p["vertex_law"])
    batch = simulate_exit(graph, start, float(p["a"]), sim)
    records = list(batch.rows())
    summary = {**_mean_dict("tau_", MeanEstimate.from_samples(batch.tau)),
               **_mean_dict("wing_", MeanEstimate.from_samples(batch.occ_wing)),
               "h_vertex": sim.h_vertex, "start_edge": start.edge}
    if p["reference"]:
        sol_all = solve_exit_bvp(graph, sim.beta, float(p["a"]), h=float(p["bvp_h"]))
        sol_w = solve_exit_bvp(graph, sim.beta, float(p["a"]), h=float(p["bvp_h"]),
                               source_kinds={"wing"})
        summary["reference_tau"] = sol_all.value_at(start)
        summary["reference_wing"] = sol_w.value_at(start)
    return records, summary


def _sde_params(p, epsilon, seed, dt=None, substeps=1):
    return SdeParams(epsilon=float(epsilon), dt=dt, velocity=VelocityField.from_dict(p["velocity"]),
                     seed=seed, n_paths=int(p["n_paths"]), noise_substeps=substeps,
                     boundary=p["boundary"])


def run_sde_mc(cfg):
    p = cfg.params
    spec = channel_from_config(cfg)
    sp = _sde_params(p, p["epsilon"], cfg.seed, p["dt"])
    batch = simulate_exit_2d(spec, tuple(p["start"]), float(p["a"]), sp,
                             record_paths=int(p["record_paths"]),
                             record_every=int(p["record_every"]))
    summary = {**_mean_dict("sigma_", MeanEstimate.from_samples(batch.sigma)),
               "push_mean": float(batch.push.mean()), "dt": sp.dt, "epsilon": sp.epsilon}
    extra = {}
    if batch.paths:
        extra["paths.csv"] = [{"path": i, "x": float(r[0]), "z": float(r[1]),
                               "push": float(r[2])}
                              for i, arr in enumerate(batch.paths) for r in arr]
    return list(batch.rows()), summary, extra


def graph_reference(spec, start, a, beta, h=1e-3):
    """Graph-limit mean exit time from the finite-volume solver."""
    graph = build_graph(spec)
    return solve_exit_bvp(graph, beta, a, h=h).value_at(_start_point(graph, start))


def run_eps_sweep(cfg):
    p = cfg.params
    spec = channel_from_config(cfg)
    beta = VelocityField.from_dict(p["velocity"]).beta
    ref = graph_reference(spec, p["start"], float(p["a"]), beta, float(p["bvp_h"]))
    eps = [float(e) for e in p["epsilons"]]
    base_dt = min(eps) ** 2 / 100.0
    records = []
    for e in eps:
        if p["common_noise"]:
            m = max(1, int(round(e ** 2 / 100.0 / base_dt)))
            sp = _sde_params(p, e, cfg.seed, m * base_dt, m)
        else:
            sp = _sde_params(p, e, derive_seed(cfg.seed, int(round(e * 1e6))))
        b = simulate_exit_2d(spec, tuple(p["start"]), float(p["a"]), sp)
        m_est = MeanEstimate.from_samples(b.sigma)
        records.append({"epsilon": e, "mean_sigma": m_est.mean, "stderr": m_est.stderr,
                        "graph_ref": ref, "rel_diff": (m_est.mean - ref) / ref,
                        "push_mean": float(b.push.mean()), "dt": sp.dt})
    order = sorted(records, key=lambda r: -r["epsilon"])
    gaps = [abs(r["mean_sigma"] - ref) for r in order]
    summary = {"graph_ref": ref,
               "monotone": all(g1 < g0 for g0, g1 in zip(gaps, gaps[1:])),
               "smallest_epsilon_rel_diff": order[-1]["rel_diff"]}
    return records, summary


def run_speed(cfg):
    p = cfg.params
    env = cfg.environment_params()
    beta = float(p["beta"])
    K = estimate_K(env, _t_grid(p), float(p["S"]), n_batches=int(p["n_batches"]),
                   n_boot=int(p["n_boot"]))
    wm = wing_moment_estimates(env, beta, int(p["n_wing_samples"]))
    est = inverse_speed(K, wm.E_n, wm.wing_term, beta, E_n_stderr=wm.E_n_stderr,
                        wing_term_stderr=wm.wing_term_stderr)
    records = [
        {"quantity": "first_term", "value": est.first_term, "stderr": est.first_stderr},
        {"quantity": "E_n", "value": wm.E_n, "stderr": wm.E_n_stderr},
        {"quantity": "wing_term", "value": wm.wing_term, "stderr": wm.wing_term_stderr},
        {"quantity": "wing_part", "value": est.wing_part, "stderr": est.wing_stderr},
        {"quantity": "inverse_speed", "value": est.value, "stderr": est.stderr},
    ]
    summary = {"inverse_speed": est.value, "inverse_speed_stderr": est.stderr,
               "speed": est.speed, "first_term": est.first_term,
               "first_term_stderr": est.first_stderr, "K_tail_bound": est.tail_bound,
               "wing_truncation_bound": wm.truncation_bound, "wing_T": wm.T_max,
               "E_n": wm.E_n, "wing_term": wm.wing_term, "env_seed": env.seed}
    lr = p.get("long_run")
    if lr:
        ratio = long_channel_ratio(env, beta, float(lr["a"]), float(lr["dt"]),
                                   int(lr["n_paths"]), float(lr["x_left"]),
                                   derive_seed(cfg.seed, 5))
        records.append({"quantity": "long_run_tau_over_a", "value": ratio.mean,
                        "stderr": ratio.stderr})
        summary["long_run_tau_over_a"] = ratio.mean
        summary["long_run_stderr"] = ratio.stderr
    return records, summary


def long_channel_ratio(env: EnvironmentParams, beta, a, dt, n_paths, x_left, seed):
    """``tau / a`` for graph-diffusion paths in one environment sample."""
    hi = a + env.a1 + 3.0 * env.block_length
    spec = sample_environment(env, (x_left, hi))
    for w in spec.wings:
        lo, up = w.span
        if lo < a < up:
            a = up  # the exit level may not cut a pocket
    graph = build_graph(spec)
    start = graph.main_edge_at(0.0)
    x0 = min(max(0.0, start.A), start.B)
    sim = SimParams(dt=dt, beta=beta, seed=seed, n_paths=n_paths)
    tau = simulate_exit(graph, (start.id, x0), a, sim).tau
    return MeanEstimate.from_samples(tau / (a - x0))


def run_oracle_compare(cfg):
    p = cfg.params
    beta, a = float(p["beta"]), float(p["a"])
    x_left = float(p["x_left"])
    records = []
    for i in range(int(p["n_shapes"])):
        spec = random_smooth_shape(derive_seed(cfg.seed, i), x_range=(x_left, a + 1.0))
        q = exit_time_quadrature(spec, beta, a, left_tail_T=-x_left).value
        graph = build_graph(spec)
        origin = GraphPoint(graph.main_edge_at(0.0).id, 0.0)
        b = solve_exit_bvp(graph, beta, a, h=float(p["bvp_h"])).value_at(origin)
        records.append({"shape": i, "quadrature": q, "bvp": b, "rel_diff": abs(b - q) / q})
    return records, {"max_rel_diff": max(r["rel_diff"] for r in records),
                     "n_shapes": len(records)}


RUNNERS = {"validate-geometry": run_validate, "estimate-K": run_estimate_K,
           "graph-mc": run_graph_mc, "sde-mc": run_sde_mc, "eps-sweep": run_eps_sweep,
           "speed": run_speed, "oracle-compare": run_oracle_compare}


# --------------------------------------------------------------------- output
def _plain(v):
    if isinstance(v, (np.floating, np.integer, np.bool_)):
        return v.item()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def emit_results(records, fmt: str, path) -> Path:
    """Write ``records`` (a list of flat dicts) as CSV or JSON.  Floats are
    written with ``repr`` so both formats carry identical values."""
    records = list(records)
    if not records:
        raise ParameterError("no records to write")
    if fmt not in ("csv", "json"):
        raise ParameterError(f"unknown format {fmt!r}")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == "json":
            path.write_text(json.dumps(_plain(records), indent=1) + "\n")
        else:
            cols = list(records[0])
            with path.open("w", newline="") as fh:
                w = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
                w.writeheader()
                for r in records:
                    w.writerow({k: repr(v) if isinstance(v, float) else v
                                for k, v in _plain(r).items()})
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(path: Path, obj):
    try:
        path.write_text(json.dumps(_plain(obj), indent=1, sort_keys=True) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def write_manifest(cfg: ExperimentConfig, out: Path, seed_source: str):
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {
        "tool": "narrowchan", "version": __version__, "kind": cfg.kind,
        "config": cfg.resolved(), "seed_source": seed_source,
        "python": platform.python_version(), "numpy": np.__version__,
    })


def run_config(cfg: ExperimentConfig, out, seed_source: str = "config") -> dict:
    """Run one experiment and write its artefacts; returns the summary."""
    out = Path(out)
    try:
        write_manifest(cfg, out, seed_source)
    except OSError as exc:
        raise OutputError(f"cannot write to {out}: {exc}") from exc
    log.info("running %s (seed %d)", cfg.kind, cfg.seed)
    res = RUNNERS[cfg.kind](cfg)
    records, summary = res[0], res[1]
    extra = res[2] if len(res) > 2 else {}
    emit_results(records, "csv", out / "results.csv")
    emit_results(records, "json", out / "results.json")
    for name, recs in extra.items():
        emit_results(recs, "csv", out / name)
    summary = {"kind": cfg.kind, "seed": cfg.seed, **summary}
    _write_json(out / "summary.json", summary)
    return summary


def load_config(path, seed_override=None) -> ExperimentConfig:
    try:
        d = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(d, seed_override)


def seed_from_environment():
    v = os.environ.get(SEED_ENV_VAR)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError as exc:
        raise ParameterError(f"{SEED_ENV_VAR} must be an integer") from exc


__all__ = ["ExperimentConfig", "DEFAULTS", "KINDS", "SEED_ENV_VAR", "build_channel",
           "channel_from_config", "emit_results", "graph_reference", "load_config",
           "long_channel_ratio", "random_smooth_shape", "run_config"]
