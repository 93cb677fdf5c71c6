"""Hydrodynamic (Madelung) evolution of a density-phase pair.

The state is (rho, S) with S the phase of the equivalent wave function
psi = sqrt(rho) e^{iS}; the guiding velocity is v = (2 beta / m) dS/dx.
Stepping works on the log amplitude R = ln(rho)/2, which keeps rho positive
by construction and makes the quantum-pressure term polynomial in the
derivatives of R:

    dR/dt = -(2 beta/m) S_x R_x - (beta/m) S_xx
    dS/dt = -V/(2 beta) - (beta/m) (S_x^2 - R_xx - R_x^2)

Nodes are outside this description: when the density develops an interior
zero the Madelung form is singular and stepping refuses to continue,
pointing at the wave-equation backend instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import binary_erosion

from . import _backend
from .grids import (
    contiguous_runs,
    fd1_order4,
    fd1_periodic4,
    fd2_order4,
    fd2_periodic4,
    support_mask,
    uniform_spacing,
)
from .params import PhysicalParams, Potential

SUPPORT_REL = 1e-3
# below KNEE_REL of the peak density the stepped log variables are treated
# as vacuum and re-extended from the support each step; the extension is
# floored at TAIL_FLOOR_REL of the peak.  Tail perturbations amplify like
# 1/sqrt(rho) as they ride inward, so the knee caps the gain at 1e5 and
# keeps roundoff-seeded noise below 1e-10 of anything the core can see.
KNEE_REL = 1e-10
TAIL_FLOOR_REL = 1e-30


class NodeFormationError(RuntimeError):
    """Density developed a node; the hydrodynamic form is singular there."""


@dataclass(frozen=True)
class HydroState:
    """Density and phase on a uniform grid at one instant.

    bc is "box" (one-sided stencils at the ends, density decaying there)
    or "periodic" (the grid omits the repeated endpoint).
    """

    x: NDArray[np.float64]
    rho: NDArray[np.float64]
    s: NDArray[np.float64]
    t: float = 0.0
    bc: str = "box"

    @property
    def dx(self) -> float:
        return uniform_spacing(self.x)

    @property
    def periodic(self) -> bool:
        return self.bc == "periodic"

    def norm(self) -> float:
        if self.periodic:
            return float(np.sum(self.rho)) * self.dx
        return float(np.trapezoid(self.rho, self.x))

    def velocity(self, params: PhysicalParams) -> NDArray[np.float64]:
        """Guiding velocity v = (2 beta / m) dS/dx."""
        d1 = fd1_periodic4 if self.periodic else fd1_order4
        return (2.0 * params.beta / params.m) * d1(self.s, self.dx)


def hydro_state(x, rho, s, t: float = 0.0, bc: str = "box",
                renormalize: bool = False) -> HydroState:
    """Validated constructor: uniform grid, nonnegative rho, unit mass."""
    x = np.asarray(x, dtype=float)
    rho = np.asarray(rho, dtype=float)
    s = np.asarray(s, dtype=float)
    if bc not in ("box", "periodic"):
        raise ValueError("bc must be 'box' or 'periodic'")
    if rho.shape != x.shape or s.shape != x.shape:
        raise ValueError("rho and s must match the grid shape")
    if np.any(rho < 0.0):
        raise ValueError("rho must be nonnegative")
    state = HydroState(x=x, rho=rho, s=s, t=float(t), bc=bc)
    norm = state.norm()
    if renormalize:
        state = replace(state, rho=rho / norm)
    elif abs(norm - 1.0) > 1e-8:
        raise ValueError(f"rho integrates to {norm:.12f}, expected 1 within 1e-8")
    return state


def quantum_potential(
    rho,
    dx: float,
    beta: float,
    m: float,
    periodic: bool = False,
    support_rel: float = SUPPORT_REL,
) -> NDArray[np.float64]:
    """Q(x) = -(2 beta^2 / m) (sqrt(rho))'' / sqrt(rho), NaN off the support.

    The second derivative is taken of the amplitude on the full grid (the
    amplitude stays smooth through the tails), and only the division is
    restricted to the support mask, so no one-sided stencils appear at
    mask edges.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0.0):
        raise ValueError("rho must be nonnegative")
    mask = support_mask(rho, rel=support_rel)
    if not np.any(mask):
        raise ValueError("empty support mask")
    amp = np.sqrt(rho)
    d2 = fd2_periodic4(amp, dx) if periodic else fd2_order4(amp, dx)
    out = np.full(rho.shape, np.nan)
    out[mask] = -(2.0 * beta * beta / m) * d2[mask] / amp[mask]
    return out


def quantum_potential_two_particle(
    rho1,
    rho2,
    rho12,
    dx1: float,
    dx2: float,
    beta: float,
    m: float,
) -> NDArray[np.float64]:
    """Quantum potential acting on particle 1 of a correlated pair.

    For rho(x1, x2) = rho1(x1) rho2(x2) rho12(x1, x2),

    Q1 = -(2 beta^2/m) [ (sqrt(rho1))''/sqrt(rho1)
                         + (1/sqrt(rho12)) d^2_{x1} sqrt(rho12)
                         + (1/2)(d_{x1} ln rho1)(d_{x1} ln rho12) ]

    returned on the (x1, x2) grid, NaN where rho1 is off its support.
    The first term is the single-particle quantum potential, so rho12 = 1
    reduces Q1 to it exactly.
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    rho12 = np.asarray(rho12, dtype=float)
    if rho12.shape != (rho1.size, rho2.size):
        raise ValueError("rho12 must have shape (len(rho1), len(rho2))")
    if np.any(rho12 <= 0.0):
        raise ValueError("rho12 must be strictly positive")
    if np.any(rho1 < 0.0) or np.any(rho2 < 0.0):
        raise ValueError("densities must be nonnegative")

    mask1 = support_mask(rho1)
    amp1 = np.sqrt(rho1)
    term1 = np.full(rho1.shape, np.nan)
    term1[mask1] = fd2_order4(amp1, dx1)[mask1] / amp1[mask1]

    amp12 = np.sqrt(rho12)
    term2 = fd2_order4(amp12, dx1) / amp12

    dlog1 = np.full(rho1.shape, np.nan)
    for run in contiguous_runs(mask1):
        if run.stop - run.start >= 5:
            dlog1[run] = fd1_order4(np.log(rho1[run]), dx1)
    cross = 0.5 * dlog1[:, None] * fd1_order4(np.log(rho12), dx1)

    return -(2.0 * beta * beta / m) * (term1[:, None] + term2 + cross)


def _check_step_bounds(state: HydroState, dt: float, params: PhysicalParams) -> None:
    dx = state.dx
    tbm = 2.0 * params.beta / params.m
    if tbm * dt / (dx * dx) > 0.5:
        raise ValueError(
            f"dispersive bound violated: (2 beta/m) dt/dx^2 = "
            f"{tbm * dt / (dx * dx):.3f} > 0.5"
        )
    d1 = fd1_periodic4 if state.periodic else fd1_order4
    # guard transport where mass lives; phase noise in the empty tail
    # (rho below ~1e-14 of peak) moves nothing
    carrying = state.rho >= 1e-14 * float(state.rho.max())
    vmax = tbm * float(np.max(np.abs(d1(state.s, dx))[carrying]))
    if vmax * dt > 0.5 * dx:
        raise ValueError(
            f"advective CFL violated: max|v| dt = {vmax * dt:.3e} > dx/2"
        )


def _check_nodes(rho: NDArray[np.float64]) -> None:
    if not np.all(np.isfinite(rho)):
        raise NodeFormationError(
            "density lost smoothness; use the wave-equation backend"
        )
    mask = support_mask(rho, rel=SUPPORT_REL)
    idx = np.flatnonzero(mask)
    if idx.size == 0 or np.any(np.diff(idx) > 1):
        raise NodeFormationError(
            "density fell below the support threshold inside the support "
            "(node forming); use the wave-equation backend"
        )


def _extend_vacuum_tails(r: NDArray[np.float64], s: NDArray[np.float64]) -> None:
    """Overwrite the vacuum zone of the log variables from the support edge.

    Cells with r below the knee (density under KNEE_REL of the peak) get
    the exact quadratic continuation of the last three support cells
    (Newton backward differences); the log amplitude is capped at the knee
    value and floored at TAIL_FLOOR_REL.  Quadratic log amplitudes and
    quadratic phases (Gaussian packets, spreading or boosted) are
    reproduced to roundoff, so clean states are unaffected.
    """
    i_pk = int(np.argmax(r))
    knee = r[i_pk] + 0.5 * math.log(KNEE_REL)
    floor = r[i_pk] + 0.5 * math.log(TAIL_FLOOR_REL)
    mask = r >= knee
    run = next(rn for rn in contiguous_runs(mask) if rn.start <= i_pk < rn.stop)
    i0, i1 = run.start, run.stop - 1
    if i1 - i0 < 4:
        return
    n = r.size
    if i1 < n - 1:
        d = np.arange(1.0, n - i1)
        quad = 0.5 * d * (d + 1.0)
        d1 = r[i1] - r[i1 - 1]
        d2 = r[i1] - 2.0 * r[i1 - 1] + r[i1 - 2]
        ext = np.minimum(r[i1] + d * d1 + quad * d2, r[i1])
        r[i1 + 1:] = np.maximum(ext, floor)
        s1 = s[i1] - s[i1 - 1]
        s2 = s[i1] - 2.0 * s[i1 - 1] + s[i1 - 2]
        s[i1 + 1:] = s[i1] + d * s1 + quad * s2
    if i0 > 0:
        d = np.arange(float(i0), 0.0, -1.0)
        quad = 0.5 * d * (d + 1.0)
        d1 = r[i0] - r[i0 + 1]
        d2 = r[i0] - 2.0 * r[i0 + 1] + r[i0 + 2]
        ext = np.minimum(r[i0] + d * d1 + quad * d2, r[i0])
        r[:i0] = np.maximum(ext, floor)
        s1 = s[i0] - s[i0 + 1]
        s2 = s[i0] - 2.0 * s[i0 + 1] + s[i0 + 2]
        s[:i0] = s[i0] + d * s1 + quad * s2


def step_madelung(
    state: HydroState,
    dt: float,
    potential: Potential,
    params: PhysicalParams,
    backend: str | None = None,
) -> HydroState:
    """Advance (rho, S) one explicit RK4 step of the Madelung system.

    Preconditions: the advective CFL bound max|v| dt <= dx/2 and the
    dispersive bound (2 beta/m) dt/dx^2 <= 0.5.  Raises NodeFormationError
    when the density is (or becomes) non-smooth or loses interior support.

    After every box step the vacuum tails (density below KNEE_REL of the
    peak) are re-extended from the support: tail perturbations of the log
    variables grow like 1/sqrt(rho) as they propagate inward while the
    wave-function content there is nil, and erasing that zone each step
    keeps the noise from accumulating.  Densities above 1e-10 of the peak
    are never touched.
    """
    if np.any(state.rho <= 0.0):
        raise NodeFormationError(
            "density touches zero on the grid; use the wave-equation backend"
        )
    _check_nodes(state.rho)
    _check_step_bounds(state, dt, params)

    kern = _backend.get_kernels(backend)
    vv = potential.V(state.x) / (2.0 * params.beta)
    r = 0.5 * np.log(state.rho)
    s = state.s.copy()
    tbm = 2.0 * params.beta / params.m
    bom = params.beta / params.m
    kern.madelung_step(r, s, vv, dt, state.dx, tbm, bom, state.periodic)
    if not state.periodic:
        _extend_vacuum_tails(r, s)
    rho2 = np.exp(2.0 * r)
    _check_nodes(rho2)
    return HydroState(x=state.x, rho=rho2, s=s, t=state.t + dt, bc=state.bc)


def evolve_hydro(
    state: HydroState,
    potential: Potential,
    params: PhysicalParams,
    t_final: float,
    dt: float,
    snapshot_times: Sequence[float] | None = None,
    backend: str | None = None,
) -> list[HydroState]:
    """Step to t_final, returning states at the requested times.

    snapshot_times default to [t_final]; they are snapped to step
    boundaries and must be increasing and within the run.
    """
    span = t_final - state.t
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
            k = int(round((t_req - state.t) / dt))
            if k < 0 or k > n_steps:
                raise ValueError("snapshot times must lie within the run")
            snaps.append(k)
        if any(b <= a for a, b in zip(snaps, snaps[1:])):
            raise ValueError("snapshot times must be strictly increasing")

    out = []
    current = state
    for k in range(n_steps + 1):
        if snaps and k == snaps[0]:
            out.append(current)
            snaps.pop(0)
            if not snaps:
                break
        if k < n_steps:
            current = step_madelung(current, dt, potential, params, backend)
    return out


def align_phase_series(states: Sequence[HydroState]) -> list[HydroState]:
    """Remove 2 pi jumps of the phase anchor across a snapshot series.

    Each state's S is shifted by a multiple of 2 pi so the grid-center value
    moves by less than pi between consecutive snapshots, making centered
    time differences of S meaningful.
    """
    if not states:
        return []
    out = [states[0]]
    for state in states[1:]:
        c = state.x.size // 2
        jump = state.s[c] - out[-1].s[c]
        shift = 2.0 * np.pi * round(jump / (2.0 * np.pi))
        out.append(replace(state, s=state.s - shift))
    return out


def hamilton_jacobi_residual(
    series: Sequence[HydroState],
    dt: float,
    potential: Potential,
    params: PhysicalParams,
) -> NDArray[np.float64]:
    """Residual of the quantum Hamilton-Jacobi equation on a snapshot series.

    r(x) = 2 beta dS/dt + (2 beta^2/m)(dS/dx)^2 + Q_pot + V, NaN outside the
    eroded support; rows correspond to the interior snapshots (centered time
    differences over triples of the uniformly spaced series).
    """
    if len(series) < 3:
        raise ValueError("need at least 3 time slices")
    x = series[0].x
    bc = series[0].bc
    for state in series[1:]:
        if state.bc != bc or not np.array_equal(state.x, x):
            raise ValueError("grid mismatch across slices")
    dx = series[0].dx
    beta, m = params.beta, params.m
    d1 = fd1_periodic4 if bc == "periodic" else fd1_order4
    v_ext = potential.V(x)

    rows = []
    for k in range(1, len(series) - 1):
        st = (series[k + 1].s - series[k - 1].s) / (2.0 * dt)
        sx = d1(series[k].s, dx)
        q = quantum_potential(series[k].rho, dx, beta, m,
                              periodic=(bc == "periodic"))
        r = 2.0 * beta * st + (2.0 * beta * beta / m) * sx * sx + q + v_ext
        valid = binary_erosion(np.isfinite(q), iterations=2)
        row = np.full(x.shape, np.nan)
        row[valid] = r[valid]
        rows.append(row)
    return np.stack(rows)
