"""Finite-mode surrogate of the vacuum radiation field.

The spectral energy density of the zero-point field is

    rho_0(omega) = hbar omega^3 / (2 pi^2 c^3),

so one Cartesian component of the electric field seen by a 1-D particle has
one-sided power spectral density (Gaussian units, <E^2> = 4 pi u, isotropy
factor 1/3)

    S_E(omega) = (4 pi / 3) rho_0(omega) = 2 hbar omega^3 / (3 pi c^3).

A realization over a band [omega_min, omega_max] is the mode sum

    E(t) = sum_j c_j (a_j cos omega_j t + b_j sin omega_j t),

with a_j, b_j independent standard normals and c_j^2 = S_E(omega_j) dOmega
on a linearly spaced frequency comb.  The comb makes E(t) periodic with
recurrence time 2 pi / dOmega; trajectories must stay shorter than that.

This normalization is what drives a charged oscillator of damping
Gamma = tau omega0^2 to the stationary energy hbar omega0 / 2: the exact
per-mode response sum (stationary_oscillator_moments) is the oracle for it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .params import PhysicalParams, Potential


def spectral_density(omega, params: PhysicalParams):
    """Vacuum spectral energy density rho_0(omega) = hbar omega^3 / (2 pi^2 c^3)."""
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("spectral density is defined for omega > 0")
    return params.hbar * omega**3 / (2.0 * np.pi**2 * params.c**3)


def electric_psd(omega, params: PhysicalParams):
    """One-sided PSD of one electric-field component: (4 pi / 3) rho_0."""
    return (4.0 * np.pi / 3.0) * spectral_density(omega, params)


@dataclass(frozen=True)
class SpectralConfig:
    omega_min: float
    omega_max: float
    n_modes: int
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0.0 < self.omega_min < self.omega_max):
            raise ValueError("need 0 < omega_min < omega_max")
        if self.n_modes < 2:
            raise ValueError("need at least 2 modes")


@dataclass(frozen=True)
class ModeSet:
    """Frequency comb with amplitudes c_j and the master seed for draws."""

    omegas: NDArray[np.float64]
    amplitudes: NDArray[np.float64]
    seed: int

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    @property
    def delta_omega(self) -> float:
        return float(self.omegas[1] - self.omegas[0])

    @property
    def recurrence_time(self) -> float:
        return 2.0 * math.pi / self.delta_omega

    def total_power(self) -> float:
        """<E^2> = sum_j c_j^2."""
        return float(np.sum(self.amplitudes**2))


def build_modes(config: SpectralConfig, params: PhysicalParams) -> ModeSet:
    omegas = np.linspace(config.omega_min, config.omega_max, config.n_modes)
    d_omega = omegas[1] - omegas[0]
    amplitudes = np.sqrt(electric_psd(omegas, params) * d_omega)
    return ModeSet(omegas=omegas, amplitudes=amplitudes, seed=config.seed)


@dataclass(frozen=True)
class FieldRealization:
    """One draw of the quadrature amplitudes for every mode."""

    a: NDArray[np.float64]
    b: NDArray[np.float64]
    index: int


def sample_realization(modes: ModeSet, index: int) -> FieldRealization:
    """Deterministic draw for (seed, index): stream-split PCG64."""
    if index < 0:
        raise ValueError("realization index must be nonnegative")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=modes.seed, spawn_key=(index,))
    )
    a = rng.standard_normal(modes.n_modes)
    b = rng.standard_normal(modes.n_modes)
    return FieldRealization(a=a, b=b, index=index)


def eval_field(modes: ModeSet, realization: FieldRealization, t) -> NDArray:
    """E(t) for one realization; t may be scalar or array."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    phases = np.outer(modes.omegas, t)
    ca = modes.amplitudes * realization.a
    cb = modes.amplitudes * realization.b
    out = ca @ np.cos(phases) + cb @ np.sin(phases)
    return out if out.size > 1 else out[0]


def analytic_autocorrelation(modes: ModeSet, lags) -> NDArray:
    """C(dt) = sum_j c_j^2 cos(omega_j dt) (band-limited cosine transform)."""
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    return (modes.amplitudes**2) @ np.cos(np.outer(modes.omegas, lags))


def estimate_autocorrelation(
    modes: ModeSet,
    lags,
    n_realizations: int = 200,
    first_index: int = 0,
):
    """Monte-Carlo <E(0) E(dt)> with standard errors.

    Returns (mean, standard_error), each shaped like lags.
    """
    if n_realizations < 100:
        raise ValueError("need at least 100 realizations for stable errors")
    lags = np.atleast_1d(np.asarray(lags, dtype=float))
    times = np.concatenate(([0.0], lags))
    prods = np.empty((n_realizations, lags.size))
    for i in range(n_realizations):
        r = sample_realization(modes, first_index + i)
        e = eval_field(modes, r, times)
        prods[i] = e[0] * e[1:]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(n_realizations)
    return mean, se


def gaussianity_pvalues(
    modes: ModeSet, t_points, n_realizations: int = 400, first_index: int = 0
) -> NDArray[np.float64]:
    """Normality-test p-values of E(t) across realizations at fixed times."""
    from scipy.stats import normaltest

    t_points = np.atleast_1d(np.asarray(t_points, dtype=float))
    samples = np.empty((n_realizations, t_points.size))
    for i in range(n_realizations):
        r = sample_realization(modes, first_index + i)
        samples[i] = np.atleast_1d(eval_field(modes, r, t_points))
    return np.asarray([normaltest(samples[:, k]).pvalue for k in range(t_points.size)])


def average_periodogram(
    modes: ModeSet,
    t_final: float,
    n_samples: int,
    n_realizations: int = 50,
    first_index: int = 0,
):
    """Averaged one-sided periodogram of sampled windows, per rad/s.

    Returns (omega_grid, psd_estimate).  The window must stay well inside
    the recurrence time and resolve the band (t_final >> 2 pi / bandwidth).
    """
    if t_final >= modes.recurrence_time:
        raise ValueError("window longer than the field recurrence time")
    dt = t_final / n_samples
    nyquist = math.pi / dt
    if modes.omegas[-1] >= nyquist:
        raise ValueError("sampling too coarse for the band (aliasing)")
    times = dt * np.arange(n_samples)
    acc = None
    for i in range(n_realizations):
        r = sample_realization(modes, first_index + i)
        e = eval_field(modes, r, times)
        spec = np.abs(np.fft.rfft(e)) ** 2
        acc = spec if acc is None else acc + spec
    acc /= n_realizations
    # one-sided PSD per rad/s: S(omega_k) = 2 dt |X_k|^2 / (N * 2 pi)
    psd = 2.0 * dt * acc / (n_samples * 2.0 * math.pi)
    omega_grid = 2.0 * math.pi * np.fft.rfftfreq(n_samples, d=dt)
    return omega_grid, psd


def stationary_oscillator_moments(
    modes: ModeSet, params: PhysicalParams, potential: Potential
):
    """Exact stationary (<x^2>, <p^2>) of the damped driven oscillator.

    For a harmonic well the radiation-reaction substitution is exactly a
    linear drag Gamma = tau omega0^2, so the stationary response to the
    finite mode sum is the per-mode susceptibility sum

        <x^2> = (kappa/m)^2 sum_j c_j^2 |chi(omega_j)|^2,
        <p^2> = m^2 (kappa/m)^2 sum_j c_j^2 omega_j^2 |chi(omega_j)|^2,

    with |chi(w)|^2 = 1 / ((omega0^2 - w^2)^2 + Gamma^2 w^2).  This is the
    oracle the simulated ensemble is checked against.
    """
    if potential.kind != "harmonic":
        raise ValueError("stationary moments are defined for the harmonic well")
    omega0_sq = potential.c1 / params.m
    gamma = params.tau * omega0_sq
    w = modes.omegas
    chi2 = 1.0 / ((omega0_sq - w * w) ** 2 + (gamma * w) ** 2)
    c2 = modes.amplitudes**2
    drive = (params.kappa / params.m) ** 2
    x2 = drive * float(np.sum(c2 * chi2))
    p2 = params.m**2 * drive * float(np.sum(c2 * w * w * chi2))
    return x2, p2


def dump_field_csv(
    modes: ModeSet, realization: FieldRealization, times, path
) -> None:
    """CSV dump of one sampled realization: columns (t, E)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    e = np.atleast_1d(eval_field(modes, realization, times))
    data = np.column_stack([times, e])
    np.savetxt(path, data, fmt="%.17g", delimiter=",", header="t,E", comments="")
