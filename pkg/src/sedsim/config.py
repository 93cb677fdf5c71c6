"""Run configuration: JSON in, validated RunConfig out.

A config file is one JSON object; anything omitted falls back to the
experiment's defaults, so {"experiment": "ground-state"} is already a
complete run.  Validation happens entirely at parse time with dotted
field paths in every message, before any compute starts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .params import PhysicalParams, Potential, coupling_for_tau, default_params
from .zpf import SpectralConfig

EXPERIMENT_NAMES = (
    "sed-relax",
    "balance",
    "equivalence",
    "wigner-contrast",
    "ground-state",
    "qpot",
)

_TOP_KEYS = {
    "experiment", "seed", "out_dir", "threads", "params", "potential",
    "spectral", "grid", "ensemble", "time", "window", "tolerances",
    "options",
}


class ConfigError(ValueError):
    """Invalid run configuration; message starts with the dotted field path."""

    def __init__(self, field_path: str, problem: str):
        self.field = field_path
        super().__init__(f"{field_path}: {problem}")


@dataclass(frozen=True)
class RunConfig:
    experiment: str
    seed: int
    out_dir: str
    threads: int
    params: PhysicalParams
    potential: Potential
    spectral: SpectralConfig | None
    grid_x: np.ndarray | None
    grid_p: np.ndarray | None
    grid_x2: np.ndarray | None
    n_members: int
    t_final: float
    dt: float
    snapshot_times: tuple[float, ...] | None
    window: tuple[float, float] | None
    tolerances: dict[str, float]
    options: dict[str, Any]
    raw: dict = field(repr=False)


def defaults_for(experiment: str) -> dict:
    """Built-in scenario for each experiment; user config overrides fields."""
    common = {
        "seed": 2026,
        "out_dir": f"runs/{experiment}",
        "threads": 1,
        "params": {"preset": "dimensionless-ho"},
        "potential": {"kind": "harmonic", "omega0": 1.0},
        "tolerances": {},
        "options": {},
    }
    per = {
        "sed-relax": {
            "params": {"preset": "dimensionless-ho", "tau": 1e-3},
            "spectral": {"omega_min": 0.9, "omega_max": 1.1, "n_modes": 1000},
            "ensemble": {"n_members": 2000, "x0": 0.0, "p0": 0.0},
            "time": {"t_final": 20000.0, "dt": 0.1,
                     "snapshots": {"start": 250.0, "stop": 20000.0,
                                   "every": 250.0}},
            "window": [10000.0, 20000.0],
            "tolerances": {"mean_energy_rel": 0.10, "beta_rel": 0.15,
                           "imbalance": 0.15},
        },
        "balance": {
            "params": {"preset": "dimensionless-ho", "tau": 1e-2},
            "spectral": {"omega_min": 0.2, "omega_max": 3.0, "n_modes": 560},
            "ensemble": {"n_members": 256, "x0": 0.0, "p0": 0.0},
            "time": {"t_final": 1200.0, "dt": 0.05,
                     "snapshots": {"start": 25.0, "stop": 1200.0,
                                   "every": 25.0}},
            "window": [600.0, 1200.0],
            "tolerances": {"imbalance": 0.2, "decay_rate_rel": 0.05},
            "options": {"decay_members": 16, "decay_t_final": 100.0,
                        "decay_dt": 0.005, "decay_x0": 1.0},
        },
        "equivalence": {
            "grid": {"x": [-8.0, 8.0, 512]},
            "time": {"t_final": 2.0 * math.pi, "dt": 2.0 * math.pi / 12832.0,
                     "snapshots": None},
            "tolerances": {"density_linf": 1e-3},
            "options": {"coherent_a": 1.0, "n_compare": 4},
        },
        "wigner-contrast": {
            "grid": {"x": [-8.0, 8.0, 257], "p": [-4.0, 4.0, 81]},
            "ensemble": {"n_members": 40000},
            "tolerances": {"marginals": 1e-6, "excited_min_abs": 1e-3,
                           "noise_sigmas": 3.0},
            "options": {"excited_n": 1, "n_z": 129,
                        "estimate_x": [-4.0, 4.0, 81]},
        },
        "ground-state": {
            "grid": {"x": [-8.0, 8.0, 513]},
            "tolerances": {"residual": 1e-8, "energy_abs": 1e-4},
            "options": {"max_iter": 200000},
        },
        "qpot": {
            "grid": {"x": [-8.0, 8.0, 513], "x2": [-4.0, 4.0, 161]},
            "tolerances": {"energy_const": 1e-6, "plane_wave": 1e-10,
                           "factorized_reduction": 1e-12,
                           "pair_analytic": 1e-6},
            "options": {"pair_correlation": 0.2},
        },
    }
    merged = dict(common)
    _deep_merge(merged, per[experiment])
    merged["experiment"] = experiment
    return merged


def _deep_merge(base: dict, update: dict) -> dict:
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _deep_merge(base[k], v)
        else:
            base[k] = v
    return base


def _expect(cond: bool, field_path: str, problem: str) -> None:
    if not cond:
        raise ConfigError(field_path, problem)


def _number(raw, field_path: str, minimum=None, strict=False) -> float:
    _expect(isinstance(raw, (int, float)) and not isinstance(raw, bool),
            field_path, f"expected a number, got {raw!r}")
    v = float(raw)
    _expect(math.isfinite(v), field_path, "must be finite")
    if minimum is not None:
        if strict:
            _expect(v > minimum, field_path, f"must be > {minimum:g}")
        else:
            _expect(v >= minimum, field_path, f"must be >= {minimum:g}")
    return v


def _integer(raw, field_path: str, minimum: int | None = None) -> int:
    _expect(isinstance(raw, int) and not isinstance(raw, bool),
            field_path, f"expected an integer, got {raw!r}")
    if minimum is not None:
        _expect(raw >= minimum, field_path, f"must be >= {minimum}")
    return raw


def _parse_params(section: dict) -> PhysicalParams:
    _expect(isinstance(section, dict), "params", "expected an object")
    known = {"preset", "m", "hbar", "beta", "tau", "kappa", "c"}
    for k in section:
        _expect(k in known, f"params.{k}", "unknown field")
    preset = section.get("preset", "dimensionless-ho")
    try:
        params = default_params(preset)
    except (KeyError, ValueError):
        raise ConfigError("params.preset", f"unknown preset {preset!r}")
    changes = {}
    for key in ("m", "hbar", "beta", "c"):
        if key in section:
            changes[key] = _number(section[key], f"params.{key}",
                                   minimum=0.0, strict=True)
    if "tau" in section:
        changes["tau"] = _number(section["tau"], "params.tau", minimum=0.0)
    if changes:
        params = params.with_changes(**changes)
    if "kappa" in section:
        kappa = _number(section["kappa"], "params.kappa", minimum=0.0)
        params = params.with_changes(kappa=kappa)
    elif "tau" in section or "m" in section or "c" in section:
        # keep the coupling matched to the drag unless set explicitly
        params = params.with_changes(
            kappa=coupling_for_tau(params.tau, params.m, params.c))
    return params


def _parse_potential(section: dict) -> Potential:
    _expect(isinstance(section, dict), "potential", "expected an object")
    kind = section.get("kind")
    _expect(kind in ("free", "harmonic", "quartic", "tabulated"),
            "potential.kind", f"unknown kind {kind!r}")
    try:
        if kind == "free":
            return Potential.free()
        if kind == "harmonic":
            omega0 = _number(section.get("omega0", 1.0), "potential.omega0",
                             minimum=0.0, strict=True)
            mass = _number(section.get("mass", 1.0), "potential.mass",
                           minimum=0.0, strict=True)
            return Potential.harmonic(omega0, mass=mass)
        if kind == "quartic":
            a = _number(section.get("a", 0.0), "potential.a")
            b = _number(section.get("b", 1.0), "potential.b", minimum=0.0)
            return Potential.quartic(a, b)
        xs = section.get("x")
        vs = section.get("values")
        _expect(isinstance(xs, list) and isinstance(vs, list),
                "potential.x", "tabulated potential needs x and values lists")
        return Potential.tabulated(np.asarray(xs, float), np.asarray(vs, float))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("potential", str(exc))


def _parse_grid(raw, field_path: str) -> np.ndarray:
    _expect(isinstance(raw, (list, tuple)) and len(raw) == 3,
            field_path, "expected [lo, hi, n]")
    lo = _number(raw[0], f"{field_path}[0]")
    hi = _number(raw[1], f"{field_path}[1]")
    n = _integer(raw[2], f"{field_path}[2]", minimum=8)
    _expect(hi > lo, field_path, "upper edge must exceed lower edge")
    return np.linspace(lo, hi, n)


def _parse_snapshots(raw, t_final: float, dt: float):
    if raw is None:
        return None
    if isinstance(raw, dict):
        start = _number(raw.get("start", dt), "time.snapshots.start",
                        minimum=0.0, strict=True)
        stop = _number(raw.get("stop", t_final), "time.snapshots.stop")
        every = _number(raw.get("every", dt), "time.snapshots.every",
                        minimum=0.0, strict=True)
        _expect(stop <= t_final + 1e-9, "time.snapshots.stop",
                "must not exceed t_final")
        times = np.arange(start, stop + 0.5 * every, every)
        return tuple(float(t) for t in times if t <= t_final + 1e-9)
    _expect(isinstance(raw, list) and raw, "time.snapshots",
            "expected a list, a {start, stop, every} object, or null")
    times = [_number(t, f"time.snapshots[{i}]") for i, t in enumerate(raw)]
    _expect(all(b > a for a, b in zip(times, times[1:])),
            "time.snapshots", "must be strictly increasing")
    _expect(times[-1] <= t_final + 1e-9, "time.snapshots",
            "must stay within t_final")
    return tuple(times)


def parse_config(data: dict) -> RunConfig:
    """Validate a raw config dict (user values over experiment defaults)."""
    _expect(isinstance(data, dict), "config", "top level must be an object")
    experiment = data.get("experiment")
    _expect(experiment in EXPERIMENT_NAMES, "experiment",
            f"must be one of {', '.join(EXPERIMENT_NAMES)}; got {experiment!r}")
    for k in data:
        _expect(k in _TOP_KEYS, k, "unknown field")

    merged = defaults_for(experiment)
    _deep_merge(merged, data)

    seed = _integer(merged["seed"], "seed", minimum=0)
    threads = _integer(merged["threads"], "threads", minimum=1)
    out_dir = merged["out_dir"]
    _expect(isinstance(out_dir, str) and out_dir, "out_dir",
            "expected a nonempty path string")

    params = _parse_params(merged["params"])
    potential = _parse_potential(merged["potential"])

    spectral = None
    if "spectral" in merged:
        sec = merged["spectral"]
        _expect(isinstance(sec, dict), "spectral", "expected an object")
        lo = _number(sec.get("omega_min"), "spectral.omega_min",
                     minimum=0.0, strict=True)
        hi = _number(sec.get("omega_max"), "spectral.omega_max")
        _expect(hi > lo, "spectral.omega_max", "must exceed omega_min")
        n_modes = _integer(sec.get("n_modes"), "spectral.n_modes", minimum=2)
        mode_seed = sec.get("seed", seed)
        spectral = SpectralConfig(omega_min=lo, omega_max=hi,
                                  n_modes=n_modes,
                                  seed=_integer(mode_seed, "spectral.seed",
                                                minimum=0))

    grid_sec = merged.get("grid", {})
    _expect(isinstance(grid_sec, dict), "grid", "expected an object")
    grid_x = (_parse_grid(grid_sec["x"], "grid.x")
              if "x" in grid_sec else None)
    grid_p = (_parse_grid(grid_sec["p"], "grid.p")
              if "p" in grid_sec else None)
    grid_x2 = (_parse_grid(grid_sec["x2"], "grid.x2")
               if "x2" in grid_sec else None)

    ens_sec = merged.get("ensemble", {})
    _expect(isinstance(ens_sec, dict), "ensemble", "expected an object")
    n_members = _integer(ens_sec.get("n_members", 0), "ensemble.n_members",
                         minimum=0)

    t_final, dt, snapshots = 0.0, 0.0, None
    if "time" in merged:
        tsec = merged["time"]
        _expect(isinstance(tsec, dict), "time", "expected an object")
        t_final = _number(tsec.get("t_final"), "time.t_final",
                          minimum=0.0, strict=True)
        dt = _number(tsec.get("dt"), "time.dt", minimum=0.0, strict=True)
        _expect(dt <= t_final, "time.dt", "must not exceed t_final")
        snapshots = _parse_snapshots(tsec.get("snapshots"), t_final, dt)

    window = None
    if merged.get("window") is not None:
        wsec = merged["window"]
        _expect(isinstance(wsec, (list, tuple)) and len(wsec) == 2,
                "window", "expected [t_lo, t_hi]")
        w0 = _number(wsec[0], "window[0]", minimum=0.0)
        w1 = _number(wsec[1], "window[1]")
        _expect(w1 > w0, "window", "upper edge must exceed lower edge")
        _expect(w1 <= t_final + 1e-9, "window", "must stay within t_final")
        window = (w0, w1)

    tol = merged.get("tolerances", {})
    _expect(isinstance(tol, dict), "tolerances", "expected an object")
    tolerances = {k: _number(v, f"tolerances.{k}", minimum=0.0, strict=True)
                  for k, v in tol.items()}

    options = merged.get("options", {})
    _expect(isinstance(options, dict), "options", "expected an object")

    # experiment-specific preconditions checkable before any compute
    if experiment in ("sed-relax", "balance"):
        _expect(params.tau > 0.0, "params.tau", "relaxation requires tau > 0")
        _expect(spectral is not None, "spectral",
                "field modes are required for this experiment")
        _expect(n_members >= 2, "ensemble.n_members", "must be >= 2")
        _expect(t_final > 0.0, "time.t_final", "a time section is required")
    if experiment == "sed-relax":
        _expect(window is not None, "window",
                "a stationary window is required")
    if experiment in ("equivalence", "ground-state", "qpot",
                      "wigner-contrast"):
        _expect(grid_x is not None, "grid.x", "an x grid is required")
    if experiment == "equivalence":
        _expect(t_final > 0.0, "time.t_final", "a time section is required")
    if experiment == "qpot":
        _expect(grid_x2 is not None, "grid.x2",
                "a second-particle grid is required")

    return RunConfig(
        experiment=experiment, seed=seed, out_dir=out_dir, threads=threads,
        params=params, potential=potential, spectral=spectral,
        grid_x=grid_x, grid_p=grid_p, grid_x2=grid_x2,
        n_members=n_members, t_final=t_final, dt=dt,
        snapshot_times=snapshots, window=window,
        tolerances=tolerances, options=options, raw=merged,
    )


def load_config(path) -> RunConfig:
    """Parse a JSON config file into a validated RunConfig."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON in {path}: {exc}")
    return parse_config(data)
