"""Linear wave evolution equivalent to the hydrodynamic system.

The density-phase pair (rho, S) closes into a single linear equation for
psi = sqrt(rho) e^{iS}, with the role of Planck's constant played by
2 beta (the calibrated momentum-dispersion scale).  Propagation uses
Strang splitting between the local potential phase and the exact kinetic
propagator in the spectral basis: plane waves on a periodic grid,
sine modes (hard walls) on a box grid.

Splitting is unitary by construction, so the norm is conserved to
roundoff; the splitting error is O(dt^2) per unit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.fft import dst, fft, idst, ifft

from .grids import contiguous_runs, fd1_order4, fd1_periodic4, uniform_spacing
from .hydro import HydroState, hydro_state
from .params import PhysicalParams, Potential

SUPPORT_REL = 1e-8
TAIL_FRACTION_MAX = 1e-10


class ResolutionError(ValueError):
    """The grid cannot represent the state's spectral content."""


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitude on a uniform grid at one instant.

    bc is "box" (psi pinned to zero at both walls) or "periodic"
    (the grid omits the repeated endpoint).
    """

    x: NDArray[np.float64]
    psi: NDArray[np.complex128]
    t: float = 0.0
    bc: str = "box"

    @property
    def dx(self) -> float:
        return uniform_spacing(self.x)

    @property
    def periodic(self) -> bool:
        return self.bc == "periodic"

    def norm(self) -> float:
        density = np.abs(self.psi) ** 2
        if self.periodic:
            return float(np.sum(density)) * self.dx
        return float(np.trapezoid(density, self.x))

    def density(self) -> NDArray[np.float64]:
        return np.abs(self.psi) ** 2


def wavefunction(x, psi, t: float = 0.0, bc: str = "box",
                 renormalize: bool = False) -> WaveFunction:
    """Validated constructor: uniform grid, unit norm, walls empty for box."""
    x = np.asarray(x, dtype=float)
    psi = np.asarray(psi, dtype=complex)
    if bc not in ("box", "periodic"):
        raise ValueError("bc must be 'box' or 'periodic'")
    if psi.shape != x.shape:
        raise ValueError("psi must match the grid shape")
    peak = float(np.max(np.abs(psi)))
    if peak == 0.0:
        raise ValueError("psi is identically zero")
    if bc == "box":
        wall = max(abs(psi[0]), abs(psi[-1]))
        if wall > 1e-8 * peak:
            raise ValueError(
                f"psi at the walls is {wall / peak:.1e} of the peak; "
                "box evolution needs decayed (or zero) wall values"
            )
    wf = WaveFunction(x=x, psi=psi, t=float(t), bc=bc)
    norm = wf.norm()
    if renormalize:
        wf = replace(wf, psi=psi / math.sqrt(norm))
    elif abs(norm - 1.0) > 1e-8:
        raise ValueError(f"|psi|^2 integrates to {norm:.12f}, expected 1 within 1e-8")
    return wf


def _wavenumbers(wf: WaveFunction) -> NDArray[np.float64]:
    n = wf.x.size
    if wf.periodic:
        return 2.0 * np.pi * np.fft.fftfreq(n, wf.dx)
    length = wf.x[-1] - wf.x[0]
    return np.pi * np.arange(1, n - 1) / length


def _spectral_tail_fraction(power: NDArray[np.float64],
                            k: NDArray[np.float64]) -> float:
    total = float(np.sum(power))
    if total == 0.0:
        return 0.0
    tail = np.abs(k) >= 0.875 * float(np.max(np.abs(k)))
    return float(np.sum(power[tail])) / total


def step_schrodinger(
    wf: WaveFunction,
    dt: float,
    potential: Potential,
    params: PhysicalParams,
) -> WaveFunction:
    """One Strang step: half potential kick, exact kinetic flight, half kick.

    The kinetic phase is exp(-i (beta/m) k^2 dt) mode by mode.  Raises
    ResolutionError when more than 1e-10 of the norm sits in the top
    eighth of the spectrum, since the spectral flight is then aliased.
    """
    bom = params.beta / params.m
    kick = np.exp(-0.25j * potential.V(wf.x) * dt / params.beta)
    k = _wavenumbers(wf)
    flight = np.exp(-1j * bom * k * k * dt)

    psi = wf.psi * kick
    if wf.periodic:
        spec = fft(psi)
        tail = _spectral_tail_fraction(np.abs(spec) ** 2, k)
        if tail > TAIL_FRACTION_MAX:
            raise ResolutionError(
                f"{tail:.1e} of the norm sits in the top eighth of the "
                "spectrum; refine the grid"
            )
        psi = ifft(spec * flight)
    else:
        spec = dst(psi[1:-1], type=1)
        tail = _spectral_tail_fraction(np.abs(spec) ** 2, k)
        if tail > TAIL_FRACTION_MAX:
            raise ResolutionError(
                f"{tail:.1e} of the norm sits in the top eighth of the "
                "spectrum; refine the grid"
            )
        psi[1:-1] = idst(spec * flight, type=1)
    psi *= kick
    return replace(wf, psi=psi, t=wf.t + dt)


def evolve_schrodinger(
    wf: WaveFunction,
    potential: Potential,
    params: PhysicalParams,
    t_final: float,
    dt: float,
    snapshot_times: Sequence[float] | None = None,
) -> list[WaveFunction]:
    """Step to t_final, returning states at the requested times.

    snapshot_times default to [t_final]; they are snapped to step
    boundaries and must be increasing and within the run.
    """
    span = t_final - wf.t
    if span <= 0 or dt <= 0:
        raise ValueError("t_final must exceed the state time and dt > 0")
    n_steps = int(round(span / dt))
    if abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError("t_final - t must be an integer number of steps")

    if snapshot_times is None:
        snaps = [n_steps]
    else:
        snaps = []
        for t_req in snapshot_times:
            k = int(round((t_req - wf.t) / dt))
            if k < 0 or k > n_steps:
                raise ValueError("snapshot times must lie within the run")
            snaps.append(k)
        if any(b <= a for a, b in zip(snaps, snaps[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    out = []
    current = wf
    for k in range(n_steps + 1):
        if snaps and k == snaps[0]:
            out.append(current)
            snaps.pop(0)
            if not snaps:
                break
        if k < n_steps:
            current = step_schrodinger(current, dt, potential, params)
    return out


@dataclass(frozen=True)
class PolarForm:
    """Density and unwrapped phase of a wave function.

    The phase is NaN off the support (|psi| below SUPPORT_REL of the peak).
    disconnected is True when the support splits into several runs (interior
    nodes); each run then carries its own independently anchored phase.
    """

    rho: NDArray[np.float64]
    s: NDArray[np.float64]
    disconnected: bool


def polar_decompose(wf: WaveFunction, support_rel: float = SUPPORT_REL) -> PolarForm:
    """psi = sqrt(rho) e^{iS} with S unwrapped along the grid.

    Within each contiguous support run the raw phase is unwrapped
    cumulatively and shifted by a multiple of 2 pi so the anchor value
    (the grid-center point, or the run's midpoint when the center is
    outside the run) lands in [-pi, pi].
    """
    amp = np.abs(wf.psi)
    rho = amp * amp
    mask = amp >= support_rel * float(np.max(amp))
    s = np.full(wf.x.shape, np.nan)
    runs = [r for r in contiguous_runs(mask) if r.stop - r.start >= 1]
    center = wf.x.size // 2
    for run in runs:
        phase = np.unwrap(np.angle(wf.psi[run]))
        anchor = center - run.start if run.start <= center < run.stop else len(phase) // 2
        shift = 2.0 * np.pi * np.round(phase[anchor] / (2.0 * np.pi))
        s[run] = phase - shift
    return PolarForm(rho=rho, s=s, disconnected=len(runs) > 1)


def flow_velocity(wf: WaveFunction, params: PhysicalParams) -> NDArray[np.float64]:
    """v = (2 beta / m) dS/dx, NaN off the support.

    Box states differentiate the unwrapped phase; periodic states use the
    gauge-free form Im(psi' / psi) with a finite-difference psi', which a
    winding phase (plane wave) would otherwise break at the seam.  Both
    routes stay independent of the spectral derivative.
    """
    tbm = 2.0 * params.beta / params.m
    amp = np.abs(wf.psi)
    mask = amp >= SUPPORT_REL * float(np.max(amp))
    if wf.periodic:
        v = np.full(wf.x.shape, np.nan)
        dpsi = fd1_periodic4(wf.psi, wf.dx)
        v[mask] = tbm * np.imag(dpsi[mask] / wf.psi[mask])
        return v
    polar = polar_decompose(wf)
    v = np.full(wf.x.shape, np.nan)
    for run in contiguous_runs(np.isfinite(polar.s)):
        if run.stop - run.start >= 5:
            v[run] = tbm * fd1_order4(polar.s[run], wf.dx)
    return v


def osmotic_velocity(wf: WaveFunction, params: PhysicalParams) -> NDArray[np.float64]:
    """u = (beta / m) d(ln rho)/dx, NaN off the support."""
    amp = np.abs(wf.psi)
    mask = amp >= SUPPORT_REL * float(np.max(amp))
    u = np.full(wf.x.shape, np.nan)
    if wf.periodic and bool(np.all(mask)):
        return (2.0 * params.beta / params.m) * fd1_periodic4(np.log(amp), wf.dx)
    for run in contiguous_runs(mask):
        if run.stop - run.start >= 5:
            u[run] = (2.0 * params.beta / params.m) * fd1_order4(
                np.log(amp[run]), wf.dx)
    return u


def momentum_identity_residual(
    wf: WaveFunction, params: PhysicalParams
) -> tuple[NDArray[np.float64], float]:
    """Pointwise residual of -i hbar dpsi/dx = m (v - i u) psi, hbar = 2 beta.

    The left side differentiates psi spectrally; v and u come from the
    unwrapped phase and the log amplitude through finite differences, so
    the two sides share no code path.  Returns (residual, scale) with the
    residual NaN off the support and scale = max|hbar dpsi/dx|.
    """
    hbar = 2.0 * params.beta
    n = wf.x.size
    if wf.periodic:
        k = 2.0 * np.pi * np.fft.fftfreq(n, wf.dx)
        dpsi = ifft(1j * k * fft(wf.psi))
    else:
        # odd reflection matches the hard-wall continuation of psi
        ext = np.concatenate([wf.psi[:-1], wf.psi[-1:], -wf.psi[-2:0:-1]])
        m_ext = ext.size
        k = 2.0 * np.pi * np.fft.fftfreq(m_ext, wf.dx)
        dpsi = ifft(1j * k * fft(ext))[:n]
    lhs = -1j * hbar * dpsi
    v = flow_velocity(wf, params)
    u = osmotic_velocity(wf, params)
    rhs = params.m * (v - 1j * u) * wf.psi
    res = np.abs(lhs - rhs)
    res[~np.isfinite(v) | ~np.isfinite(u)] = np.nan
    return res, float(np.max(np.abs(lhs)))


def wavefunction_from_hydro(state: HydroState) -> WaveFunction:
    """psi = sqrt(rho) e^{iS} on the same grid."""
    psi = np.sqrt(state.rho) * np.exp(1j * state.s)
    return WaveFunction(x=state.x, psi=psi, t=state.t, bc=state.bc)


def hydro_from_wavefunction(wf: WaveFunction) -> HydroState:
    """Polar form as a hydrodynamic state; requires connected support.

    Off-support phase values are extended constantly from the nearest
    support edge, where they multiply densities below SUPPORT_REL^2 of
    the peak.
    """
    polar = polar_decompose(wf)
    if polar.disconnected:
        raise ValueError("wave function has interior nodes; no single-valued phase")
    s = polar.s
    finite = np.isfinite(s)
    if not np.all(finite):
        idx = np.flatnonzero(finite)
        s = s.copy()
        s[: idx[0]] = s[idx[0]]
        s[idx[-1] + 1:] = s[idx[-1]]
    return hydro_state(wf.x, polar.rho, s, t=wf.t, bc=wf.bc, renormalize=True)


def ho_eigenstate(n: int, x, params: PhysicalParams,
                  omega: float = 1.0) -> WaveFunction:
    """n-th harmonic oscillator eigenstate, energy (n + 1/2) hbar omega.

    The length scale is sqrt(hbar / m omega) with hbar = 2 beta.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    x = np.asarray(x, dtype=float)
    hbar = 2.0 * params.beta
    a = params.m * omega / hbar
    xi = np.sqrt(a) * x
    h_prev = np.zeros_like(xi)
    h = np.ones_like(xi)
    for k in range(n):
        h, h_prev = 2.0 * xi * h - 2.0 * k * h_prev, h
    norm = (a / np.pi) ** 0.25 / math.sqrt(2.0**n * math.factorial(n))
    psi = norm * h * np.exp(-0.5 * xi * xi)
    return wavefunction(x, psi, renormalize=True)


def coherent_state(a: float, x, params: PhysicalParams, t: float = 0.0,
                   omega: float = 1.0) -> WaveFunction:
    """Displaced ground state oscillating at amplitude a (position units).

    At time t the center is at a cos(omega t) with momentum
    -m omega a sin(omega t); the analytic global phase is included, so
    snapshots at different t agree with propagated states pointwise.
    """
    x = np.asarray(x, dtype=float)
    hbar = 2.0 * params.beta
    aa = params.m * omega / hbar
    xc = a * math.cos(omega * t)
    pc = -params.m * omega * a * math.sin(omega * t)
    phase = pc * x / hbar - 0.5 * omega * t - 0.5 * xc * pc / hbar
    psi = (aa / np.pi) ** 0.25 * np.exp(-0.5 * aa * (x - xc) ** 2 + 1j * phase)
    return wavefunction(x, psi, t=t, renormalize=True)


def mean_energy(wf: WaveFunction, potential: Potential,
                params: PhysicalParams) -> float:
    """<H> = (hbar^2 / 2m) int |dpsi/dx|^2 + int V |psi|^2, hbar = 2 beta."""
    hbar = 2.0 * params.beta
    n = wf.x.size
    if wf.periodic:
        k = 2.0 * np.pi * np.fft.fftfreq(n, wf.dx)
        dpsi = ifft(1j * k * fft(wf.psi))
        kin = (hbar**2 / (2.0 * params.m)) * np.sum(np.abs(dpsi) ** 2) * wf.dx
        pot = np.sum(potential.V(wf.x) * wf.density()) * wf.dx
        return float(kin + pot)
    spec = dst(wf.psi[1:-1], type=1)
    k = _wavenumbers(wf)
    # DST-I Parseval: sum |c|^2 = 2 (n - 1) sum |psi|^2
    weight = wf.dx / (2.0 * (n - 1))
    kin = (hbar**2 / (2.0 * params.m)) * np.sum(k * k * np.abs(spec) ** 2) * weight
    pot = np.trapezoid(potential.V(wf.x) * wf.density(), wf.x)
    return float(kin + pot)


def momentum_density(
    wf: WaveFunction, params: PhysicalParams
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Momentum distribution (p grid, density), integrating to 1 over p.

    p = hbar k with hbar = 2 beta; box states are transformed on the full
    grid (they vanish at the walls, so the plane-wave expansion applies).
    """
    hbar = 2.0 * params.beta
    n = wf.x.size
    k = np.fft.fftshift(2.0 * np.pi * np.fft.fftfreq(n, wf.dx))
    spec = np.fft.fftshift(fft(wf.psi))
    density = np.abs(spec) ** 2 * wf.dx**2 / (2.0 * np.pi * hbar)
    return hbar * k, density
