"""Ensembles of charged trajectories in the sampled vacuum field.

Each member integrates

    dx/dt = p/m,
    dp/dt = f(x) + (tau/m) p f'(x) + kappa E_i(t),

where E_i is that member's own field realization (classical RK4, field
sampled on the half-step grid).  For a harmonic well the radiation-reaction
substitution is an exact linear drag with rate Gamma = tau omega0^2, so the
ensemble relaxes from rest to the stationary state fixed by the field
normalization; balance_report measures the power books

    d<H>/dt = dissipated + absorbed,
    dissipated = (tau/m^2) <f'(x) p^2>   (negative in a confining well),

and calibrate_beta extracts beta^2 from the momentum-dispersion identity
sigma_p^2(x) = -beta^2 d^2 ln rho / dx^2 fitted over the dense part of the
relaxed ensemble.

Evolution is deterministic: member i draws its amplitudes from the
(seed, i) stream, work is split into fixed-size member chunks so BLAS sees
identical shapes regardless of the worker count, and aggregates use NumPy's
pairwise reductions.  Identical configuration and seed give byte-identical
snapshots on a fixed BLAS build.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np
from numpy.typing import NDArray

from . import _backend
from .params import PhysicalParams, Potential
from .zpf import FieldRealization, ModeSet, sample_realization

_RK4_OSC_STABILITY = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class Ensemble:
    """Immutable description of an ensemble run (initial data and field)."""

    params: PhysicalParams
    potential: Potential
    modes: ModeSet | None
    n_members: int
    x0: float = 0.0
    p0: float = 0.0
    first_index: int = 0

    def __post_init__(self) -> None:
        if self.n_members < 1:
            raise ValueError("n_members must be >= 1")
        if self.params.kappa != 0.0 and self.modes is None:
            raise ValueError("nonzero coupling kappa requires a mode set")

    @property
    def field_active(self) -> bool:
        return self.modes is not None and self.params.kappa != 0.0


@dataclass
class EnsembleResult:
    ensemble: Ensemble
    dt: float
    n_steps: int
    times: NDArray[np.float64]
    xs: NDArray[np.float64]
    ps: NDArray[np.float64]
    backend: str

    @property
    def t_final(self) -> float:
        return float(self.n_steps * self.dt)


def _validate_dt(ens: Ensemble, dt: float) -> None:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if ens.field_active:
        bound = 2.0 * math.pi / ens.modes.omegas[-1] / 20.0
        if dt > bound * (1.0 + 1e-12):
            raise ValueError(
                f"dt = {dt:g} exceeds the field sampling bound {bound:g} "
                "(20 steps per fastest mode period)"
            )
    if ens.potential.kind == "harmonic":
        omega0 = math.sqrt(ens.potential.c1 / ens.params.m)
        bound = _RK4_OSC_STABILITY / omega0
        if dt > bound:
            raise ValueError(f"dt = {dt:g} is beyond RK4 stability {bound:g}")


def _snapshot_steps(snapshot_times, dt: float, n_steps: int) -> list[int]:
    if snapshot_times is None:
        return [n_steps]
    ts = np.atleast_1d(np.asarray(snapshot_times, dtype=float))
    if np.any(np.diff(ts) <= 0):
        raise ValueError("snapshot times must be strictly increasing")
    if ts[0] < 0 or ts[-1] > n_steps * dt * (1.0 + 1e-12):
        raise ValueError("snapshot times must lie within [0, t_final]")
    steps = [int(round(t / dt)) for t in ts]
    if len(set(steps)) != len(steps):
        raise ValueError("snapshot times collide on the step grid")
    return steps


def _chunk_ranges(n: int, chunk_size: int) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk_size, n)) for lo in range(0, n, chunk_size)]


def _field_coefficients(ens: Ensemble, lo: int, hi: int):
    """(Ca, Cb) rows c_j a_ij, c_j b_ij for members lo..hi-1."""
    modes = ens.modes
    ca = np.empty((hi - lo, modes.n_modes))
    cb = np.empty((hi - lo, modes.n_modes))
    for i in range(lo, hi):
        r = sample_realization(modes, ens.first_index + i)
        ca[i - lo] = modes.amplitudes * r.a
        cb[i - lo] = modes.amplitudes * r.b
    return ca, cb


def evolve_ensemble(
    ens: Ensemble,
    t_final: float,
    dt: float,
    snapshot_times=None,
    threads: int = 1,
    backend: str | None = None,
    window_steps: int = 2048,
    chunk_size: int = 512,
) -> EnsembleResult:
    """Integrate every member to t_final, recording (x, p) at snapshot times.

    Snapshot times are snapped to the step grid; the recorded times are the
    snapped values.  The run fails upfront if the horizon exceeds the field
    recurrence time or dt violates the sampling/stability bounds.
    """
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    _validate_dt(ens, dt)
    n_steps = int(round(t_final / dt))
    if n_steps < 1:
        raise ValueError("t_final shorter than one step")
    if ens.field_active and n_steps * dt >= ens.modes.recurrence_time:
        raise ValueError(
            f"t_final = {n_steps * dt:g} reaches the field recurrence time "
            f"{ens.modes.recurrence_time:g}; add modes or shorten the run"
        )
    if ens.potential.kind == "tabulated":
        kern = _backend.get_kernels("python")  # spline forces: NumPy path only
    else:
        kern = _backend.get_kernels(backend)

    snap_steps = _snapshot_steps(snapshot_times, dt, n_steps)
    boundaries = sorted(set(snap_steps) | {0, n_steps})
    n = ens.n_members
    x = np.full(n, float(ens.x0))
    p = np.full(n, float(ens.p0))
    n_snap = len(snap_steps)
    xs = np.empty((n_snap, n))
    ps = np.empty((n_snap, n))
    snap_index = {s: k for k, s in enumerate(sorted(snap_steps))}

    chunks = _chunk_ranges(n, chunk_size)
    field_on = ens.field_active
    coeffs = [_field_coefficients(ens, lo, hi) for lo, hi in chunks] if field_on else None
    omegas = ens.modes.omegas if field_on else None
    pot = ens.potential
    par = ens.params

    def run_chunk(ci: int, lo: int, hi: int, cos_t, sin_t, nw: int) -> None:
        if field_on:
            ca, cb = coeffs[ci]
            e2 = ca @ cos_t + cb @ sin_t
        else:
            e2 = None
        if pot.kind == "tabulated":
            kern.rk4_trajectory_window_callables(
                x[lo:hi], p[lo:hi], e2, nw, dt, par.m, par.tau, par.kappa,
                pot.force, pot.fprime,
            )
        else:
            kern.rk4_trajectory_window(
                x[lo:hi], p[lo:hi], e2, nw, dt, par.m, par.tau, par.kappa,
                pot.kind_code, pot.c1, pot.c2,
            )

    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for seg_lo, seg_hi in zip(boundaries[:-1], boundaries[1:]):
            step0 = seg_lo
            while step0 < seg_hi:
                nw = min(window_steps, seg_hi - step0)
                if field_on:
                    # half-step times as exact multiples of dt/2
                    tgrid = (0.5 * dt) * np.arange(2 * step0, 2 * (step0 + nw) + 1)
                    phases = np.outer(omegas, tgrid)
                    cos_t = np.cos(phases)
                    sin_t = np.sin(phases)
                else:
                    cos_t = sin_t = None
                if pool is None:
                    for ci, (lo, hi) in enumerate(chunks):
                        run_chunk(ci, lo, hi, cos_t, sin_t, nw)
                else:
                    futs = [
                        pool.submit(run_chunk, ci, lo, hi, cos_t, sin_t, nw)
                        for ci, (lo, hi) in enumerate(chunks)
                    ]
                    for f in futs:
                        f.result()
                step0 += nw
            if seg_hi in snap_index:
                k = snap_index[seg_hi]
                xs[k] = x
                ps[k] = p
    finally:
        if pool is not None:
            pool.shutdown()

    times = dt * np.asarray(sorted(snap_steps), dtype=float)
    return EnsembleResult(
        ensemble=ens, dt=dt, n_steps=n_steps, times=times, xs=xs, ps=ps,
        backend=kern.BACKEND_NAME,
    )


def step_trajectory(
    x: float,
    p: float,
    dt: float,
    n_steps: int,
    params: PhysicalParams,
    potential: Potential,
    modes: ModeSet | None = None,
    realization: FieldRealization | None = None,
    record_every: int = 0,
    backend: str | None = None,
):
    """Single-trajectory integrator on the same kernels as the ensemble.

    Returns (x, p) after n_steps, or (times, xs, ps) when record_every > 0.
    A member of an ensemble and step_trajectory with that member's
    realization produce bit-identical paths.
    """
    ens = Ensemble(
        params=params, potential=potential, modes=modes, n_members=1,
        x0=x, p0=p,
    )
    _validate_dt(ens, dt)
    if modes is not None and params.kappa != 0.0 and realization is None:
        raise ValueError("field evolution needs a realization")
    field_on = modes is not None and params.kappa != 0.0 and realization is not None
    if potential.kind == "tabulated":
        kern = _backend.get_kernels("python")
    else:
        kern = _backend.get_kernels(backend)

    xv = np.array([float(x)])
    pv = np.array([float(p)])
    if field_on:
        ca = (modes.amplitudes * realization.a)[None, :]
        cb = (modes.amplitudes * realization.b)[None, :]

    record = record_every > 0
    if record:
        idx = list(range(0, n_steps + 1, record_every))
        if idx[-1] != n_steps:
            idx.append(n_steps)
        times = dt * np.asarray(idx, dtype=float)
        xs = np.empty(len(idx))
        ps = np.empty(len(idx))
        xs[0] = xv[0]
        ps[0] = pv[0]

    window = 2048
    step0 = 0
    rec_pos = 1
    while step0 < n_steps:
        if record:
            next_stop = idx[rec_pos]
        else:
            next_stop = n_steps
        nw = min(window, next_stop - step0)
        if field_on:
            tgrid = (0.5 * dt) * np.arange(2 * step0, 2 * (step0 + nw) + 1)
            phases = np.outer(modes.omegas, tgrid)
            e2 = ca @ np.cos(phases) + cb @ np.sin(phases)
        else:
            e2 = None
        if potential.kind == "tabulated":
            kern.rk4_trajectory_window_callables(
                xv, pv, e2, nw, dt, params.m, params.tau, params.kappa,
                potential.force, potential.fprime,
            )
        else:
            kern.rk4_trajectory_window(
                xv, pv, e2, nw, dt, params.m, params.tau, params.kappa,
                potential.kind_code, potential.c1, potential.c2,
            )
        step0 += nw
        if record and step0 == next_stop:
            xs[rec_pos] = xv[0]
            ps[rec_pos] = pv[0]
            rec_pos += 1

    if record:
        return times, xs, ps
    return float(xv[0]), float(pv[0])


def mean_energy(x, p, params: PhysicalParams, potential: Potential) -> float:
    """<p^2/2m + V(x)> over the ensemble (pairwise-deterministic mean)."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    return float(np.mean(p * p) / (2.0 * params.m) + np.mean(potential.V(x)))


def energy_series(result: EnsembleResult):
    """(times, <H>(t)) over the recorded snapshots."""
    par = result.ensemble.params
    pot = result.ensemble.potential
    e = np.asarray(
        [mean_energy(result.xs[k], result.ps[k], par, pot) for k in range(result.times.size)]
    )
    return result.times, e


@dataclass(frozen=True)
class BalanceReport:
    """Windowed power bookkeeping of an ensemble run.

    energy_rate is the least-squares d<H>/dt over the window; dissipated is
    the mean radiation-reaction power (tau/m^2) <f'(x) p^2> (negative in a
    confining well); absorbed = energy_rate - dissipated is the field power
    implied by the books.  imbalance = energy_rate / |dissipated|: -1 for a
    pure-damping run, ~0 at the stationary state.
    """

    window: tuple[float, float]
    n_snapshots: int
    energy_rate: float
    dissipated: float
    absorbed: float
    imbalance: float
    mean_energy: float


def balance_report(result: EnsembleResult, window: tuple[float, float]) -> BalanceReport:
    par = result.ensemble.params
    pot = result.ensemble.potential
    sel = (result.times >= window[0]) & (result.times <= window[1])
    if int(np.sum(sel)) < 3:
        raise ValueError("balance window must contain at least 3 snapshots")
    t = result.times[sel]
    xs = result.xs[sel]
    ps = result.ps[sel]
    h = np.asarray([mean_energy(xs[k], ps[k], par, pot) for k in range(t.size)])
    rate = float(np.polyfit(t, h, 1)[0])
    diss = float(
        np.mean(
            [
                (par.tau / par.m**2) * np.mean(pot.fprime(xs[k]) * ps[k] * ps[k])
                for k in range(t.size)
            ]
        )
    )
    absorbed = rate - diss
    imbalance = rate / max(abs(diss), 1e-300)
    return BalanceReport(
        window=(float(t[0]), float(t[-1])),
        n_snapshots=int(t.size),
        energy_rate=rate,
        dissipated=diss,
        absorbed=absorbed,
        imbalance=imbalance,
        mean_energy=float(np.mean(h)),
    )


def fit_decay_rate(times, energies) -> float:
    """Exponential decay rate from a log-linear least-squares fit."""
    times = np.asarray(times, dtype=float)
    energies = np.asarray(energies, dtype=float)
    if np.any(energies <= 0):
        raise ValueError("energies must be positive for a log fit")
    slope = np.polyfit(times, np.log(energies), 1)[0]
    return float(-slope)


@dataclass(frozen=True)
class BetaFit:
    """Result of the momentum-dispersion calibration."""

    beta: float
    stderr: float
    n_samples: int
    bandwidth_x: float
    bandwidth_p: float
    n_fit_points: int
    beta_boot: NDArray[np.float64] = dataclass_field(repr=False, default=None)


def _beta_from_samples(fx, fp, x_grid, p_grid, fit_threshold):
    from .grids import log_density_curvature, uniform_spacing
    from .phasestats import estimate_density, local_moments

    density = estimate_density(fx, fp, x_grid, p_grid, method="kde")
    mom = local_moments(density)
    smooth_var = density.meta["bandwidth_p"] ** 2 + density.meta["bin_dp"] ** 2 / 12.0
    rho = mom.rho
    fit_mask = rho >= fit_threshold * np.max(rho)
    dx = uniform_spacing(density.x)
    curv = log_density_curvature(rho, dx, mask=fit_mask)
    g = -curv[fit_mask]
    var_corr = mom.var_p[fit_mask] - smooth_var
    w = rho[fit_mask]
    ok = np.isfinite(g) & np.isfinite(var_corr) & (g > 0)
    denom = float(np.sum(w[ok] * g[ok] * g[ok]))
    if denom <= 0:
        raise ValueError("degenerate dispersion fit (no usable curvature)")
    beta_sq = float(np.sum(w[ok] * g[ok] * var_corr[ok])) / denom
    return math.sqrt(max(beta_sq, 0.0)), int(np.sum(ok)), density


def calibrate_beta(
    xs,
    ps,
    params: PhysicalParams,
    x_grid=None,
    p_grid=None,
    fit_threshold: float = 0.1,
    grid_points: int = 161,
    grid_halfwidth_sigmas: float = 4.8,
    n_boot: int = 16,
    boot_seed: int = 0,
    potential: Potential | None = None,
    drift_tol: float = 0.2,
) -> BetaFit:
    """Fit beta^2 in sigma_p^2(x) = -beta^2 (ln rho)'' on a relaxed ensemble.

    xs, ps may be (n_snapshots, n_members) stacks (bootstrap resamples
    members, keeping snapshots of one member together) or flat samples.
    The KDE smoothing variance (bandwidth and binning) is subtracted from
    the conditional p-variance before the weighted least-squares fit over
    the region rho >= fit_threshold * max rho.

    Passing a potential turns on a stationarity guard: the fit refuses
    snapshot stacks whose per-snapshot mean energy drifts by more than
    drift_tol (relative spread), since the dispersion relation only holds
    in the balanced regime.
    """
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    if xs.shape != ps.shape:
        raise ValueError("xs and ps must have matching shapes")
    fx = xs.ravel()
    fp = ps.ravel()
    if fx.size < 2000:
        raise ValueError("calibration needs at least 2000 samples")

    if potential is not None and xs.ndim == 2 and xs.shape[0] >= 2:
        e_snap = np.array([
            mean_energy(xs[k], ps[k], params, potential) for k in range(xs.shape[0])
        ])
        e_ref = float(np.mean(e_snap))
        spread = float(np.ptp(e_snap))
        if e_ref <= 0 or spread > drift_tol * e_ref:
            raise ValueError(
                "non-stationary ensemble: mean energy drifts by "
                f"{spread:.3e} around {e_ref:.3e}; relax longer before calibrating"
            )

    if x_grid is None:
        mu, sd = float(np.mean(fx)), float(np.std(fx))
        x_grid = np.linspace(
            mu - grid_halfwidth_sigmas * sd, mu + grid_halfwidth_sigmas * sd, grid_points
        )
    if p_grid is None:
        mu, sd = float(np.mean(fp)), float(np.std(fp))
        sd = max(sd, 1e-12)
        p_grid = np.linspace(
            mu - grid_halfwidth_sigmas * sd, mu + grid_halfwidth_sigmas * sd, grid_points
        )

    beta, n_fit, density = _beta_from_samples(fx, fp, x_grid, p_grid, fit_threshold)

    boot = np.empty(0)
    stderr = float("nan")
    if n_boot > 0 and xs.ndim == 2 and xs.shape[1] >= 8:
        n_members = xs.shape[1]
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=boot_seed, spawn_key=(0xB007,))
        )
        boot = np.empty(n_boot)
        for b in range(n_boot):
            cols = rng.integers(0, n_members, size=n_members)
            bx = xs[:, cols].ravel()
            bp = ps[:, cols].ravel()
            boot[b] = _beta_from_samples(bx, bp, x_grid, p_grid, fit_threshold)[0]
        stderr = float(np.std(boot, ddof=1))

    return BetaFit(
        beta=beta,
        stderr=stderr,
        n_samples=int(fx.size),
        bandwidth_x=float(density.meta["bandwidth_x"]),
        bandwidth_p=float(density.meta["bandwidth_p"]),
        n_fit_points=n_fit,
        beta_boot=boot,
    )


def damping_rate(params: PhysicalParams, potential: Potential) -> float:
    """Gamma = tau omega0^2 for a harmonic well."""
    if potential.kind != "harmonic":
        raise ValueError("damping rate is defined for the harmonic well")
    return params.tau * potential.c1 / params.m
